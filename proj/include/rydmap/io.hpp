#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rydmap/effective_potential.hpp"
#include "rydmap/errors.hpp"
#include "rydmap/pair_interaction.hpp"
#include "rydmap/scan.hpp"
#include "rydmap/spin_dynamics.hpp"

namespace rydmap {

inline constexpr int output_schema_version = 1;

/// Where and how artifacts are written. Every file carries the schema
/// version and the hash of the config that produced it.
struct ArtifactWriter {
    std::filesystem::path dir;
    std::string config_hash;
    bool csv = true;
    bool json = true;
    std::vector<std::string> written;

    ArtifactWriter(std::filesystem::path d, std::string hash, const std::string& format)
        : dir(std::move(d)), config_hash(std::move(hash)), csv(format != "json"), json(format != "csv") {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }

    nlohmann::json header(const std::string& kind) const {
        return {{"schema_version", output_schema_version}, {"kind", kind}, {"config_hash", config_hash}};
    }

    void write_text(const std::string& name, const std::string& text) {
        const auto path = dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + path.string() + "'");
        out << text;
        if (!out) throw DataError("write failed for '" + path.string() + "'");
        written.push_back(name);
    }

    void write_json(const std::string& name, const nlohmann::json& doc) { write_text(name, doc.dump(2) + "\n"); }

    /// CSV with a leading comment line naming schema and config hash.
    void write_csv(const std::string& name, const std::string& kind, const std::vector<std::string>& columns,
                   const std::vector<std::vector<double>>& rows) {
        std::ostringstream os;
        os << "# " << kind << " schema_version=" << output_schema_version << " config_hash=" << config_hash << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        os << "\n" << std::setprecision(17);
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << "\n";
        }
        write_text(name, os.str());
    }

    void emit(const std::string& stem, const std::string& kind, const std::vector<std::string>& columns,
              const std::vector<std::vector<double>>& rows, nlohmann::json extra = nlohmann::json::object()) {
        if (csv) write_csv(stem + ".csv", kind, columns, rows);
        if (json) {
            auto doc = header(kind);
            for (auto& [k, v] : extra.items()) doc[k] = v;
            nlohmann::json records = nlohmann::json::array();
            for (const auto& r : rows) {
                nlohmann::json rec = nlohmann::json::object();
                for (std::size_t i = 0; i < columns.size(); ++i) rec[columns[i]] = r[i];
                records.push_back(std::move(rec));
            }
            doc["records"] = std::move(records);
            write_json(stem + ".json", doc);
        }
    }
};

inline double to_deg(double rad) { return rad * 180.0 / constants::pi; }

/// One record per (R, eigenstate).
inline void write_spectrum(ArtifactWriter& w, const std::vector<PairSpectrumPoint>& spectrum, double theta_rad,
                           const FieldConfig& fields, const ResonanceScan& resonances) {
    std::vector<std::vector<double>> rows;
    for (const auto& p : spectrum) {
        for (Eigen::Index k = 0; k < p.size(); ++k)
            rows.push_back({p.r_um, to_deg(theta_rad), fields.b_gauss, fields.e_mv_cm, p.energies_mhz(k),
                            p.detuning(k), p.overlaps(k)});
    }
    nlohmann::json res = nlohmann::json::array();
    for (const auto& r : resonances.resonances)
        res.push_back({{"R_um", r.r_um},
                       {"R_lo_um", r.r_lo_um},
                       {"R_hi_um", r.r_hi_um},
                       {"eigen_index", r.eigen_index},
                       {"overlap", r.overlap},
                       {"detuning_MHz", r.detuning_mhz}});
    w.emit("spectrum", "pair_spectrum",
           {"R_um", "theta_deg", "B_gauss", "E_mVcm", "energy_MHz", "detuning_MHz", "overlap"}, rows,
           {{"reference_MHz", spectrum.empty() ? 0.0 : spectrum.front().reference_mhz}});
    auto doc = w.header("resonances");
    doc["resonances"] = res;
    doc["warnings"] = resonances.warnings;
    w.write_json("resonances.json", doc);
}

inline void write_c6_profile(ArtifactWriter& w, const std::vector<C6ProfileEntry>& profile, double r_eval_um) {
    std::vector<std::vector<double>> rows;
    nlohmann::json problems = nlohmann::json::array();
    for (const auto& e : profile) {
        if (!e.error.empty()) {
            problems.push_back({{"theta_deg", to_deg(e.theta_rad)}, {"error", e.error}});
            continue;
        }
        rows.push_back({to_deg(e.theta_rad), e.fit.c6_mhz_um6, e.fit.r_min_um, e.fit.max_relative_residual,
                        e.u_at_eval_mhz, e.c6_over_r6_at_eval_mhz});
        for (const auto& warn : e.warnings) problems.push_back({{"theta_deg", to_deg(e.theta_rad)}, {"warning", warn}});
    }
    w.emit("c6_profile", "c6_profile",
           {"theta_deg", "c6_MHz_um6", "R_min_um", "max_residual", "U_eval_MHz", "c6_over_r6_eval_MHz"}, rows,
           {{"R_eval_um", r_eval_um}, {"diagnostics", problems}});
}

inline void write_trajectory(ArtifactWriter& w, const QuenchTrajectory& t, const std::string& stem = "trajectory") {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < t.points.size(); ++i) {
        const auto& o = t.points[i];
        auto at_least = [&](std::size_t k) { return k < o.p_kplus.size() ? o.p_kplus[k] : 0.0; };
        rows.push_back({t.pulse_areas[i], t.times_us[i], o.f_r, o.p_rr(), at_least(3), at_least(5), t.norm_errors[i]});
    }
    w.emit(stem, "trajectory", {"pulse_area", "time_us", "f_R", "P_rr", "P_3plus", "P_5plus", "norm_error"}, rows);
}

/// Probability of every configuration at every recorded time (large).
inline void write_configuration_dump(ArtifactWriter& w, const QuenchTrajectory& t, const TruncatedBasis& basis) {
    std::ofstream out(w.dir / "configurations.csv");
    if (!out) throw DataError("cannot write configurations.csv");
    out << "# configurations schema_version=" << output_schema_version << " config_hash=" << w.config_hash << "\n";
    out << "pulse_area,config,probability\n" << std::setprecision(17);
    for (std::size_t i = 0; i < t.states.size(); ++i) {
        for (std::size_t k = 0; k < basis.size(); ++k)
            out << t.pulse_areas[i] << "," << basis.configs[k] << "," << std::norm(t.states[i][k]) << "\n";
    }
    w.written.push_back("configurations.csv");
}

inline void write_scan(ArtifactWriter& w, const ScanResult& r) {
    const auto& s = r.spec;
    nlohmann::json prr = nlohmann::json::array(), estar = nlohmann::json::array();
    std::vector<std::vector<double>> rows;
    nlohmann::json errors = nlohmann::json::array();
    for (std::size_t ib = 0; ib < s.b_gauss.size(); ++ib) {
        nlohmann::json prow = nlohmann::json::array(), erow = nlohmann::json::array();
        for (std::size_t it = 0; it < s.theta_rad.size(); ++it) {
            const auto& p = r.at(ib, it);
            if (p.ok()) {
                prow.push_back(p.result.prr_mean);
                erow.push_back(p.result.e_star_mv_cm);
            } else {
                prow.push_back(nullptr);
                erow.push_back(nullptr);
                errors.push_back({{"B_gauss", p.b_gauss}, {"theta_deg", to_deg(p.theta_rad)}, {"error", p.error}});
            }
            for (const auto& e : p.result.samples) {
                rows.push_back({p.b_gauss, to_deg(p.theta_rad), e.e_mv_cm,
                                e.prr_mean ? *e.prr_mean : std::numeric_limits<double>::quiet_NaN(),
                                static_cast<double>(p.dimension)});
            }
        }
        prr.push_back(prow);
        estar.push_back(erow);
    }
    std::vector<double> theta_deg;
    for (double t : s.theta_rad) theta_deg.push_back(to_deg(t));
    auto doc = w.header("scan_matrix");
    doc["B_gauss"] = s.b_gauss;
    doc["theta_deg"] = theta_deg;
    doc["prr_mean"] = prr;
    doc["E_star"] = estar;
    doc["R_um"] = s.r_um;
    doc["omega_MHz"] = s.omega_mhz;
    doc["window_pulse_area"] = {s.window.area_lo, s.window.area_hi};
    doc["window_samples"] = s.window.samples;
    doc["e_policy"] = s.e_policy.maximize ? "maximize" : "fixed";
    doc["errors"] = errors;
    w.write_json("scan_matrix.json", doc);
    w.write_csv("scan_points.csv", "scan_points", {"B_gauss", "theta_deg", "E_mVcm", "prr_mean", "dimension"}, rows);
}

/// Run record: config hash, data version, wall time, basis sizes, artifacts.
struct RunManifest {
    std::string mode;
    std::string config_hash;
    std::string data_file;
    std::string data_version;
    double wall_time_s = 0.0;
    nlohmann::json basis_sizes = nlohmann::json::object();
    std::vector<std::string> warnings;

    nlohmann::json to_json(const std::vector<std::string>& artifacts) const {
        return {{"schema_version", output_schema_version},
                {"kind", "manifest"},
                {"mode", mode},
                {"config_hash", config_hash},
                {"data_file", data_file},
                {"data_version", data_version},
                {"wall_time_s", wall_time_s},
                {"basis_sizes", basis_sizes},
                {"warnings", warnings},
                {"artifacts", artifacts}};
    }
};

}  // namespace rydmap
