#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rydmap/errors.hpp"
#include "rydmap/pair_interaction.hpp"
#include "rydmap/parallel.hpp"
#include "rydmap/two_atom_model.hpp"

namespace rydmap {

/// Pulse-area window of the long-time average, sampled at the midpoints of
/// `samples` equal sub-intervals.
struct AveragingWindow {
    double area_lo = 4.0 * constants::pi;
    double area_hi = 8.0 * constants::pi;
    int samples = 64;

    void validate() const {
        if (!(area_lo >= 0) || !(area_hi > area_lo)) throw ConfigError("averaging window needs 0 <= start < end");
        if (samples < 1) throw ConfigError("averaging window needs at least one sample");
    }

    std::vector<double> areas() const {
        std::vector<double> a(static_cast<std::size_t>(samples));
        const double w = (area_hi - area_lo) / samples;
        for (int k = 0; k < samples; ++k) a[static_cast<std::size_t>(k)] = area_lo + (k + 0.5) * w;
        return a;
    }
};

/// Electric-field policy of a scan: one fixed value, or the maximum of the
/// mean P_rr over a grid of values.
struct EFieldPolicy {
    bool maximize = false;
    double fixed_mv_cm = 0.0;
    double min_mv_cm = 0.0;
    double max_mv_cm = 20.0;
    double step_mv_cm = 2.0;

    void validate() const {
        if (!maximize) {
            if (!std::isfinite(fixed_mv_cm)) throw ConfigError("fixed E must be finite");
            return;
        }
        if (!(max_mv_cm >= min_mv_cm)) throw ConfigError("E range needs min <= max");
        if (!(step_mv_cm > 0)) throw ConfigError("E step must be positive");
    }

    std::vector<double> values() const {
        if (!maximize) return {fixed_mv_cm};
        return linear_grid(min_mv_cm, max_mv_cm, step_mv_cm);
    }
};

/// Long-time average of P_rr in the full two-atom model.
struct LongTimeResult {
    double prr_mean = 0.0;
    Eigen::Index dimension = 0;
};

inline LongTimeResult long_time_prr(const TwoAtomFullModel& model, double omega_mhz, const AveragingWindow& window) {
    window.validate();
    if (!(omega_mhz > 0)) throw ConfigError("the long-time average needs a positive Rabi frequency");
    const auto traj = model.evolve(omega_mhz, times_for_pulse_areas(omega_mhz, window.areas()));
    double sum = 0.0;
    for (const auto& p : traj.points) sum += p.p_rr();
    return {std::clamp(sum / static_cast<double>(traj.points.size()), 0.0, 1.0), model.dimension()};
}

inline LongTimeResult long_time_prr(const PairBasis& basis, const AtomicStructure& atom, const FieldConfig& fields,
                                    const Geometry& geometry, int max_multipole, double omega_mhz,
                                    const AveragingWindow& window = {}) {
    return long_time_prr(TwoAtomFullModel(basis, atom, fields, geometry, max_multipole), omega_mhz, window);
}

struct EFieldSample {
    double e_mv_cm = 0.0;
    std::optional<double> prr_mean;  // empty when the solve failed
    std::string error;
};

struct WorstCaseResult {
    double e_star_mv_cm = 0.0;
    double prr_mean = 0.0;
    std::vector<EFieldSample> samples;
    Eigen::Index dimension = 0;  // two-atom model dimension

    bool any_success() const {
        for (const auto& s : samples)
            if (s.prr_mean) return true;
        return false;
    }
};

/// Picks the maximum over the successful samples; ties go to the smallest E.
inline void select_worst_case(WorstCaseResult& r) {
    bool found = false;
    for (const auto& s : r.samples) {
        if (!s.prr_mean) continue;
        if (!found || *s.prr_mean > r.prr_mean || (*s.prr_mean == r.prr_mean && s.e_mv_cm < r.e_star_mv_cm)) {
            r.prr_mean = *s.prr_mean;
            r.e_star_mv_cm = s.e_mv_cm;
            found = true;
        }
    }
}

/// Grid search over E at fixed B, angle and distance. `at_angle` is a pair
/// Hamiltonian in the full sector at that angle; its multipole matrices are
/// reused for every field value.
inline WorstCaseResult worst_case_efield(const PairBasis& basis, const AtomicStructure& atom,
                                         const PairHamiltonian& at_angle, double b_gauss, double r_um,
                                         double omega_mhz, const std::vector<double>& e_values,
                                         const AveragingWindow& window = {}) {
    if (e_values.empty()) throw ConfigError("E search needs at least one value");
    WorstCaseResult r;
    for (double e : e_values) {
        EFieldSample s;
        s.e_mv_cm = e;
        try {
            const auto h = at_angle.with_fields(basis, atom, FieldConfig{b_gauss, e});
            const auto lt = long_time_prr(TwoAtomFullModel(basis, atom, h, r_um), omega_mhz, window);
            s.prr_mean = lt.prr_mean;
            r.dimension = lt.dimension;
        } catch (const Error& ex) {
            s.error = ex.what();
        }
        r.samples.push_back(std::move(s));
    }
    select_worst_case(r);
    return r;
}

inline WorstCaseResult worst_case_efield(const PairBasis& basis, const AtomicStructure& atom, double b_gauss,
                                         const Geometry& geometry, int max_multipole, double omega_mhz,
                                         const std::vector<double>& e_values, const AveragingWindow& window = {}) {
    const PairHamiltonian h(basis, atom, FieldConfig{b_gauss, 0.0}, geometry.theta_rad, max_multipole,
                            SectorMode::full);
    return worst_case_efield(basis, atom, h, b_gauss, geometry.r_um, omega_mhz, e_values, window);
}

struct ScanSpec {
    std::vector<double> b_gauss;
    std::vector<double> theta_rad;
    EFieldPolicy e_policy;
    double r_um = 6.1;
    double omega_mhz = 1.2;
    AveragingWindow window;
    int max_multipole = 2;

    void validate() const {
        if (b_gauss.empty() || theta_rad.empty()) throw ConfigError("scan grids must be non-empty");
        for (double t : theta_rad)
            if (!(t >= 0 && t <= constants::pi)) throw ConfigError("scan angles must lie in [0, 180] degrees");
        for (double b : b_gauss)
            if (!std::isfinite(b)) throw ConfigError("scan B values must be finite");
        if (!(r_um > 0)) throw ConfigError("scan R must be positive");
        if (!(omega_mhz > 0)) throw ConfigError("scan Rabi frequency must be positive");
        if (max_multipole < 1) throw ConfigError("max_multipole must be >= 1");
        e_policy.validate();
        window.validate();
    }

    nlohmann::json to_json() const {
        return {{"b_gauss", b_gauss},
                {"theta_rad", theta_rad},
                {"e_maximize", e_policy.maximize},
                {"e_values_mv_cm", e_policy.values()},
                {"r_um", r_um},
                {"omega_mhz", omega_mhz},
                {"window", {window.area_lo, window.area_hi, window.samples}},
                {"max_multipole", max_multipole}};
    }
};

struct ScanPoint {
    std::size_t ib = 0;
    std::size_t it = 0;
    double b_gauss = 0.0;
    double theta_rad = 0.0;
    WorstCaseResult result;  // one sample for a fixed-E policy
    Eigen::Index dimension = 0;
    std::string error;       // set when no field value succeeded

    bool ok() const { return error.empty(); }
};

struct ScanResult {
    ScanSpec spec;
    std::vector<ScanPoint> points;  // row-major over (B, theta)

    const ScanPoint& at(std::size_t ib, std::size_t it) const { return points.at(ib * spec.theta_rad.size() + it); }
};

namespace detail {

inline nlohmann::json point_to_json(const ScanPoint& p) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : p.result.samples) {
        nlohmann::json j{{"e_mv_cm", s.e_mv_cm}};
        j["prr_mean"] = s.prr_mean ? nlohmann::json(*s.prr_mean) : nlohmann::json(nullptr);
        if (!s.error.empty()) j["error"] = s.error;
        samples.push_back(std::move(j));
    }
    return {{"kind", "point"},   {"ib", p.ib},           {"it", p.it},         {"b_gauss", p.b_gauss},
            {"theta_rad", p.theta_rad}, {"samples", samples}, {"dimension", p.dimension}, {"error", p.error}};
}

inline ScanPoint point_from_json(const nlohmann::json& j) {
    ScanPoint p;
    p.ib = j.at("ib").get<std::size_t>();
    p.it = j.at("it").get<std::size_t>();
    p.b_gauss = j.at("b_gauss").get<double>();
    p.theta_rad = j.at("theta_rad").get<double>();
    p.dimension = j.at("dimension").get<Eigen::Index>();
    p.error = j.at("error").get<std::string>();
    for (const auto& s : j.at("samples")) {
        EFieldSample e;
        e.e_mv_cm = s.at("e_mv_cm").get<double>();
        if (!s.at("prr_mean").is_null()) e.prr_mean = s.at("prr_mean").get<double>();
        if (s.contains("error")) e.error = s.at("error").get<std::string>();
        p.result.samples.push_back(std::move(e));
    }
    p.result.dimension = p.dimension;
    select_worst_case(p.result);
    return p;
}

inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

}  // namespace detail

/// Append-only JSON-lines record of completed grid points. The first line
/// names the spec it belongs to; resuming with a different spec is refused.
class ScanCheckpoint {
public:
    ScanCheckpoint(std::string path, const std::string& spec_hash) : path_(std::move(path)) {
        std::ifstream in(path_);
        if (in) {
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(line);
                } catch (const nlohmann::json::parse_error&) {
                    // a torn final line from an interrupted write is dropped
                    if (in.peek() == std::char_traits<char>::eof()) break;
                    throw DataError("checkpoint " + path_ + " line " + std::to_string(line_no) + " is not valid JSON");
                }
                if (j.value("kind", "") == "header") {
                    if (j.value("spec_hash", "") != spec_hash)
                        throw ConfigError("checkpoint " + path_ + " belongs to a different scan spec");
                    has_header_ = true;
                } else {
                    auto p = detail::point_from_json(j);
                    done_[{p.ib, p.it}] = std::move(p);
                }
            }
        }
        out_.open(path_, std::ios::app);
        if (!out_) throw DataError("cannot open checkpoint " + path_ + " for appending");
        if (!has_header_) {
            write_line(nlohmann::json{{"kind", "header"}, {"spec_hash", spec_hash}}.dump());
            has_header_ = true;
        }
    }

    const ScanPoint* find(std::size_t ib, std::size_t it) const {
        auto i = done_.find({ib, it});
        return i == done_.end() ? nullptr : &i->second;
    }

    std::size_t completed() const { return done_.size(); }

    void record(const ScanPoint& p) {
        const std::lock_guard lock(mutex_);
        write_line(detail::point_to_json(p).dump());
    }

private:
    void write_line(const std::string& s) {
        out_ << s << '\n';
        out_.flush();
    }

    std::string path_;
    std::ofstream out_;
    bool has_header_ = false;
    std::map<std::pair<std::size_t, std::size_t>, ScanPoint> done_;
    std::mutex mutex_;
};

inline std::string scan_spec_hash(const ScanSpec& spec) { return detail::fnv1a_hex(spec.to_json().dump()); }

/// Mean P_rr over the (B, theta) grid. Angles are processed column by
/// column so one set of multipole matrices serves every B and E of a column.
/// Failed points are recorded and the scan carries on.
inline ScanResult grid_scan(const ScanSpec& spec, const PairBasis& basis, const AtomicStructure& atom,
                            ScanCheckpoint* checkpoint = nullptr, Parallelism budget = {}) {
    spec.validate();
    ScanResult result;
    result.spec = spec;
    const std::size_t nb = spec.b_gauss.size(), nt = spec.theta_rad.size();
    result.points.resize(nb * nt);
    const auto e_values = spec.e_policy.values();

    for (std::size_t it = 0; it < nt; ++it) {
        std::vector<std::size_t> todo;
        for (std::size_t ib = 0; ib < nb; ++ib) {
            if (const ScanPoint* done = checkpoint ? checkpoint->find(ib, it) : nullptr) {
                result.points[ib * nt + it] = *done;
            } else {
                todo.push_back(ib);
            }
        }
        if (todo.empty()) continue;

        std::optional<PairHamiltonian> at_angle;
        std::string angle_error;
        try {
            at_angle.emplace(basis, atom, FieldConfig{}, spec.theta_rad[it], spec.max_multipole, SectorMode::full);
        } catch (const Error& e) {
            angle_error = e.what();
        }

        parallel_for(todo.size(), budget, [&](std::size_t k) {
            const std::size_t ib = todo[k];
            ScanPoint p;
            p.ib = ib;
            p.it = it;
            p.b_gauss = spec.b_gauss[ib];
            p.theta_rad = spec.theta_rad[it];
            if (!at_angle) {
                p.error = angle_error;
            } else {
                p.result = worst_case_efield(basis, atom, *at_angle, p.b_gauss, spec.r_um, spec.omega_mhz, e_values,
                                             spec.window);
                p.dimension = p.result.dimension;
                if (!p.result.any_success()) p.error = p.result.samples.front().error;
            }
            if (!p.ok()) {
                std::ostringstream os;
                os << "B=" << p.b_gauss << " G, theta=" << p.theta_rad * 180.0 / constants::pi << " deg: " << p.error;
                p.error = os.str();
            }
            if (checkpoint) checkpoint->record(p);
            result.points[ib * nt + it] = std::move(p);
        });
    }
    return result;
}

}  // namespace rydmap
