#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rydmap/atomic_state.hpp"
#include "rydmap/errors.hpp"
#include "rydmap/lattice.hpp"
#include "rydmap/pair_interaction.hpp"
#include "rydmap/scan.hpp"

namespace rydmap {

inline constexpr int config_schema_version = 1;

inline const std::vector<std::string>& run_modes() {
    static const std::vector<std::string> modes{"pair-spectrum", "c6", "quench-spin", "quench-full", "scan"};
    return modes;
}

struct TargetSpec {
    int n = 61;
    int l = 2;
    double j = 1.5;
    double mj = 1.5;
    bool operator==(const TargetSpec&) const = default;
    AtomicState state() const { return AtomicState::make(n, l, j, mj); }
};

struct GeometrySpec {
    double r_um = 6.5;
    double theta_deg = 78.0;
    bool operator==(const GeometrySpec&) const = default;
};

/// Atom array for quench-spin. "pair" places two atoms at the configured geometry.
struct LatticeSpec {
    std::string kind = "pair";  // pair | ring | square | explicit
    int atoms = 8;
    int rows = 7;
    int cols = 7;
    double spacing_um = 6.5;
    std::vector<std::array<double, 2>> sites_um;  // (x, z) for kind = explicit
    bool operator==(const LatticeSpec&) const = default;
};

struct BasisSpec {
    double energy_window_mhz = 2000.0;
    int n_window = 2;
    int l_max = 4;
    int max_multipole = 2;
    int m_window = -1;
    bool operator==(const BasisSpec&) const = default;
    BasisCutoffs cutoffs() const { return {energy_window_mhz, n_window, l_max, max_multipole, m_window}; }
};

struct SpectrumSpec {
    double r_min_um = 6.0;
    double r_max_um = 12.0;
    double r_step_um = 0.25;
    std::string sector = "automatic";  // automatic | full | symmetric
    double resonance_window_mhz = 1.2;
    double overlap_threshold = 0.01;
    double refine_tolerance_um = 0.01;
    bool operator==(const SpectrumSpec&) const = default;
};

struct CurveSpec {
    std::vector<double> theta_deg{0, 10, 20, 30, 40, 50, 60, 70, 78, 80, 90};
    double r_min_um = 6.0;
    double r_max_um = 20.0;
    double r_step_um = 0.25;
    double fit_r_min_um = 8.0;
    double r_eval_um = 10.0;
    bool operator==(const CurveSpec&) const = default;
};

struct TimeSpec {
    double pulse_area_max_pi = 8.0;  // final pulse area in units of pi
    int records = 97;                // equally spaced in pulse area, including 0 and the end
    double dt_us = 0.0;              // split-step size; 0 selects the default
    bool operator==(const TimeSpec&) const = default;
};

struct SpinSpec {
    std::string truncation = "neighbours";  // neighbours | blockade | none
    double blockade_factor = 1.0;
    bool dump_configurations = false;
    double memory_budget_gib = 4.0;
    bool operator==(const SpinSpec&) const = default;
};

struct ScanGridSpec {
    std::vector<double> b_gauss{-8, -4, 0, 4, 8};
    std::vector<double> theta_deg{0, 22.5, 45, 67.5, 90};
    std::string e_policy = "maximize";  // fixed | maximize
    double e_mv_cm = 0.0;               // fixed value
    double e_min_mv_cm = 0.0;
    double e_max_mv_cm = 20.0;
    double e_step_mv_cm = 2.0;
    double window_start_pi = 4.0;
    double window_end_pi = 8.0;
    int window_samples = 64;
    std::string checkpoint;  // empty: <output dir>/scan_checkpoint.jsonl
    bool operator==(const ScanGridSpec&) const = default;
};

struct OutputSpec {
    std::string dir = "out";
    std::string format = "both";  // csv | json | both
    bool operator==(const OutputSpec&) const = default;
};

struct ExperimentConfig {
    std::string mode = "pair-spectrum";
    std::string data_file = "rb87_quantum_defects.json";
    TargetSpec target;
    FieldConfig fields;
    GeometrySpec geometry;
    LatticeSpec lattice;
    double omega_mhz = 1.2;  // Omega / 2pi
    BasisSpec basis;
    SpectrumSpec spectrum;
    CurveSpec curve;
    TimeSpec time;
    SpinSpec spin;
    ScanGridSpec scan;
    OutputSpec output;

    bool operator==(const ExperimentConfig&) const = default;

    double theta_rad() const { return geometry.theta_deg * constants::pi / 180.0; }
    Geometry pair_geometry() const { return {geometry.r_um, theta_rad()}; }

    std::vector<double> record_pulse_areas() const {
        std::vector<double> a;
        for (int k = 0; k < time.records; ++k)
            a.push_back(time.records == 1 ? time.pulse_area_max_pi * constants::pi
                                          : time.pulse_area_max_pi * constants::pi * k / (time.records - 1));
        return a;
    }

    Lattice make_lattice() const {
        if (lattice.kind == "pair") {
            const double t = theta_rad();
            return Lattice::explicit_sites({{0.0, 0.0}, {geometry.r_um * std::sin(t), geometry.r_um * std::cos(t)}});
        }
        if (lattice.kind == "ring") return Lattice::ring(lattice.atoms, lattice.spacing_um);
        if (lattice.kind == "square") return Lattice::square(lattice.rows, lattice.cols, lattice.spacing_um);
        std::vector<Lattice::Site> s;
        for (const auto& p : lattice.sites_um) s.push_back({p[0], p[1]});
        return Lattice::explicit_sites(std::move(s));
    }

    ScanSpec scan_spec() const {
        ScanSpec s;
        s.b_gauss = scan.b_gauss;
        for (double t : scan.theta_deg) s.theta_rad.push_back(t * constants::pi / 180.0);
        s.e_policy.maximize = scan.e_policy == "maximize";
        s.e_policy.fixed_mv_cm = scan.e_mv_cm;
        s.e_policy.min_mv_cm = scan.e_min_mv_cm;
        s.e_policy.max_mv_cm = scan.e_max_mv_cm;
        s.e_policy.step_mv_cm = scan.e_step_mv_cm;
        s.r_um = geometry.r_um;
        s.omega_mhz = omega_mhz;
        s.window = {scan.window_start_pi * constants::pi, scan.window_end_pi * constants::pi, scan.window_samples};
        s.max_multipole = basis.max_multipole;
        return s;
    }

    void validate() const;
};

namespace detail {

/// Reads the keys of one JSON object into typed fields and remembers which
/// ones were used, so leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const nlohmann::json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ConfigError(name("") + " must be a section (object)");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        used_.insert(key);
        try {
            out = it->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(name(key) + " has the wrong type (got " + std::string(it->type_name()) + ")");
        }
    }

    void get(const std::string& key, int& out) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        used_.insert(key);
        if (!it->is_number_integer() && !(it->is_number_float() && std::floor(it->get<double>()) == it->get<double>()))
            throw ConfigError(name(key) + " must be an integer");
        out = static_cast<int>(it->get<double>());
    }

    template <class Fn>
    void section(const std::string& key, Fn&& fn) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        used_.insert(key);
        ObjectReader sub(*it, name(key));
        fn(sub);
        sub.finish();
    }

    void finish() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!used_.count(k)) throw ConfigError("unknown key '" + name(k) + "'");
        }
    }

    std::string name(const std::string& key) const {
        if (where_.empty()) return key.empty() ? "config" : key;
        return key.empty() ? where_ : where_ + "." + key;
    }

private:
    const nlohmann::json& obj_;
    std::string where_;
    std::set<std::string> used_;
};

inline int line_of_byte(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(key + " " + what); };
    auto positive = [&](const std::string& key, double v) {
        if (!(v > 0) || !std::isfinite(v)) fail(key, "must be positive");
    };
    if (std::find(run_modes().begin(), run_modes().end(), mode) == run_modes().end())
        fail("mode", "must be one of pair-spectrum, c6, quench-spin, quench-full, scan (got '" + mode + "')");
    try {
        target.state();
    } catch (const Error& e) {
        fail("target", std::string("is not a valid state: ") + e.what());
    }
    if (!std::isfinite(fields.b_gauss)) fail("fields.b_gauss", "must be finite");
    if (!std::isfinite(fields.e_mv_cm)) fail("fields.e_mv_cm", "must be finite");
    positive("geometry.r_um", geometry.r_um);
    if (!(geometry.theta_deg >= 0 && geometry.theta_deg <= 180)) fail("geometry.theta_deg", "must lie in [0, 180]");
    if (!(omega_mhz > 0) || !std::isfinite(omega_mhz)) fail("omega_mhz", "must be positive (times are set by pulse area)");

    const std::set<std::string> kinds{"pair", "ring", "square", "explicit"};
    if (!kinds.count(lattice.kind)) fail("lattice.kind", "must be pair, ring, square or explicit");
    if (lattice.kind == "ring" || lattice.kind == "square") positive("lattice.spacing_um", lattice.spacing_um);
    if (lattice.kind == "ring" && lattice.atoms < 2) fail("lattice.atoms", "must be >= 2");
    if (lattice.kind == "square" && (lattice.rows < 1 || lattice.cols < 1)) fail("lattice.rows/cols", "must be >= 1");
    if (lattice.kind == "explicit" && lattice.sites_um.empty()) fail("lattice.sites_um", "must list at least one site");

    positive("basis.energy_window_mhz", basis.energy_window_mhz);
    if (basis.n_window < 0) fail("basis.n_window", "must be >= 0");
    if (basis.l_max < 0) fail("basis.l_max", "must be >= 0");
    if (basis.max_multipole < 1) fail("basis.max_multipole", "must be >= 1");

    positive("spectrum.r_min_um", spectrum.r_min_um);
    if (!(spectrum.r_max_um >= spectrum.r_min_um)) fail("spectrum.r_max_um", "must be >= spectrum.r_min_um");
    positive("spectrum.r_step_um", spectrum.r_step_um);
    if (spectrum.sector != "automatic" && spectrum.sector != "full" && spectrum.sector != "symmetric")
        fail("spectrum.sector", "must be automatic, full or symmetric");
    if (spectrum.sector == "symmetric" && fields.e_mv_cm != 0.0)
        fail("spectrum.sector", "cannot be symmetric with a nonzero electric field");
    positive("spectrum.resonance_window_mhz", spectrum.resonance_window_mhz);
    if (!(spectrum.overlap_threshold >= 0 && spectrum.overlap_threshold <= 1))
        fail("spectrum.overlap_threshold", "must lie in [0, 1]");
    positive("spectrum.refine_tolerance_um", spectrum.refine_tolerance_um);

    if (curve.theta_deg.empty()) fail("curve.theta_deg", "must list at least one angle");
    for (double t : curve.theta_deg)
        if (!(t >= 0 && t <= 180)) fail("curve.theta_deg", "entries must lie in [0, 180]");
    positive("curve.r_min_um", curve.r_min_um);
    if (!(curve.r_max_um > curve.r_min_um)) fail("curve.r_max_um", "must exceed curve.r_min_um");
    positive("curve.r_step_um", curve.r_step_um);
    positive("curve.r_eval_um", curve.r_eval_um);

    if (!(time.pulse_area_max_pi >= 0)) fail("time.pulse_area_max_pi", "must be >= 0");
    if (time.records < 1) fail("time.records", "must be >= 1");
    if (!(time.dt_us >= 0)) fail("time.dt_us", "must be >= 0");

    if (spin.truncation != "neighbours" && spin.truncation != "blockade" && spin.truncation != "none")
        fail("spin.truncation", "must be neighbours, blockade or none");
    positive("spin.blockade_factor", spin.blockade_factor);
    positive("spin.memory_budget_gib", spin.memory_budget_gib);

    if (scan.e_policy != "fixed" && scan.e_policy != "maximize") fail("scan.e_policy", "must be fixed or maximize");
    if (scan.b_gauss.empty()) fail("scan.b_gauss", "must be non-empty");
    if (scan.theta_deg.empty()) fail("scan.theta_deg", "must be non-empty");
    for (double t : scan.theta_deg)
        if (!(t >= 0 && t <= 180)) fail("scan.theta_deg", "entries must lie in [0, 180]");
    if (scan.e_policy == "maximize") {
        if (!(scan.e_max_mv_cm >= scan.e_min_mv_cm)) fail("scan.e_max_mv_cm", "must be >= scan.e_min_mv_cm");
        positive("scan.e_step_mv_cm", scan.e_step_mv_cm);
    }
    if (!(scan.window_start_pi >= 0 && scan.window_end_pi > scan.window_start_pi))
        fail("scan.window_end_pi", "must exceed scan.window_start_pi >= 0");
    if (scan.window_samples < 1) fail("scan.window_samples", "must be >= 1");

    if (output.format != "csv" && output.format != "json" && output.format != "both")
        fail("output.format", "must be csv, json or both");
    if (output.dir.empty()) fail("output.dir", "must not be empty");
}

inline ExperimentConfig config_from_json(const nlohmann::json& doc) {
    ExperimentConfig c;
    detail::ObjectReader r(doc, "");
    int schema = config_schema_version;
    r.get("schema_version", schema);
    if (schema != config_schema_version)
        throw ConfigError("schema_version " + std::to_string(schema) + " is not supported (expected " +
                          std::to_string(config_schema_version) + ")");
    r.get("mode", c.mode);
    r.get("data_file", c.data_file);
    r.get("omega_mhz", c.omega_mhz);
    r.section("target", [&](auto& s) {
        s.get("n", c.target.n);
        s.get("l", c.target.l);
        s.get("j", c.target.j);
        s.get("mj", c.target.mj);
    });
    r.section("fields", [&](auto& s) {
        s.get("b_gauss", c.fields.b_gauss);
        s.get("e_mv_cm", c.fields.e_mv_cm);
    });
    r.section("geometry", [&](auto& s) {
        s.get("r_um", c.geometry.r_um);
        s.get("theta_deg", c.geometry.theta_deg);
    });
    r.section("lattice", [&](auto& s) {
        s.get("kind", c.lattice.kind);
        s.get("atoms", c.lattice.atoms);
        s.get("rows", c.lattice.rows);
        s.get("cols", c.lattice.cols);
        s.get("spacing_um", c.lattice.spacing_um);
        s.get("sites_um", c.lattice.sites_um);
    });
    r.section("basis", [&](auto& s) {
        s.get("energy_window_mhz", c.basis.energy_window_mhz);
        s.get("n_window", c.basis.n_window);
        s.get("l_max", c.basis.l_max);
        s.get("max_multipole", c.basis.max_multipole);
        s.get("m_window", c.basis.m_window);
    });
    r.section("spectrum", [&](auto& s) {
        s.get("r_min_um", c.spectrum.r_min_um);
        s.get("r_max_um", c.spectrum.r_max_um);
        s.get("r_step_um", c.spectrum.r_step_um);
        s.get("sector", c.spectrum.sector);
        s.get("resonance_window_mhz", c.spectrum.resonance_window_mhz);
        s.get("overlap_threshold", c.spectrum.overlap_threshold);
        s.get("refine_tolerance_um", c.spectrum.refine_tolerance_um);
    });
    r.section("curve", [&](auto& s) {
        s.get("theta_deg", c.curve.theta_deg);
        s.get("r_min_um", c.curve.r_min_um);
        s.get("r_max_um", c.curve.r_max_um);
        s.get("r_step_um", c.curve.r_step_um);
        s.get("fit_r_min_um", c.curve.fit_r_min_um);
        s.get("r_eval_um", c.curve.r_eval_um);
    });
    r.section("time", [&](auto& s) {
        s.get("pulse_area_max_pi", c.time.pulse_area_max_pi);
        s.get("records", c.time.records);
        s.get("dt_us", c.time.dt_us);
    });
    r.section("spin", [&](auto& s) {
        s.get("truncation", c.spin.truncation);
        s.get("blockade_factor", c.spin.blockade_factor);
        s.get("dump_configurations", c.spin.dump_configurations);
        s.get("memory_budget_gib", c.spin.memory_budget_gib);
    });
    r.section("scan", [&](auto& s) {
        s.get("b_gauss", c.scan.b_gauss);
        s.get("theta_deg", c.scan.theta_deg);
        s.get("e_policy", c.scan.e_policy);
        s.get("e_mv_cm", c.scan.e_mv_cm);
        s.get("e_min_mv_cm", c.scan.e_min_mv_cm);
        s.get("e_max_mv_cm", c.scan.e_max_mv_cm);
        s.get("e_step_mv_cm", c.scan.e_step_mv_cm);
        s.get("window_start_pi", c.scan.window_start_pi);
        s.get("window_end_pi", c.scan.window_end_pi);
        s.get("window_samples", c.scan.window_samples);
        s.get("checkpoint", c.scan.checkpoint);
    });
    r.section("output", [&](auto& s) {
        s.get("dir", c.output.dir);
        s.get("format", c.output.format);
    });
    r.finish();
    c.validate();
    return c;
}

/// Fully resolved config, every default written out.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    return {
        {"schema_version", config_schema_version},
        {"mode", c.mode},
        {"data_file", c.data_file},
        {"omega_mhz", c.omega_mhz},
        {"target", {{"n", c.target.n}, {"l", c.target.l}, {"j", c.target.j}, {"mj", c.target.mj}}},
        {"fields", {{"b_gauss", c.fields.b_gauss}, {"e_mv_cm", c.fields.e_mv_cm}}},
        {"geometry", {{"r_um", c.geometry.r_um}, {"theta_deg", c.geometry.theta_deg}}},
        {"lattice",
         {{"kind", c.lattice.kind},
          {"atoms", c.lattice.atoms},
          {"rows", c.lattice.rows},
          {"cols", c.lattice.cols},
          {"spacing_um", c.lattice.spacing_um},
          {"sites_um", c.lattice.sites_um}}},
        {"basis",
         {{"energy_window_mhz", c.basis.energy_window_mhz},
          {"n_window", c.basis.n_window},
          {"l_max", c.basis.l_max},
          {"max_multipole", c.basis.max_multipole},
          {"m_window", c.basis.m_window}}},
        {"spectrum",
         {{"r_min_um", c.spectrum.r_min_um},
          {"r_max_um", c.spectrum.r_max_um},
          {"r_step_um", c.spectrum.r_step_um},
          {"sector", c.spectrum.sector},
          {"resonance_window_mhz", c.spectrum.resonance_window_mhz},
          {"overlap_threshold", c.spectrum.overlap_threshold},
          {"refine_tolerance_um", c.spectrum.refine_tolerance_um}}},
        {"curve",
         {{"theta_deg", c.curve.theta_deg},
          {"r_min_um", c.curve.r_min_um},
          {"r_max_um", c.curve.r_max_um},
          {"r_step_um", c.curve.r_step_um},
          {"fit_r_min_um", c.curve.fit_r_min_um},
          {"r_eval_um", c.curve.r_eval_um}}},
        {"time",
         {{"pulse_area_max_pi", c.time.pulse_area_max_pi}, {"records", c.time.records}, {"dt_us", c.time.dt_us}}},
        {"spin",
         {{"truncation", c.spin.truncation},
          {"blockade_factor", c.spin.blockade_factor},
          {"dump_configurations", c.spin.dump_configurations},
          {"memory_budget_gib", c.spin.memory_budget_gib}}},
        {"scan",
         {{"b_gauss", c.scan.b_gauss},
          {"theta_deg", c.scan.theta_deg},
          {"e_policy", c.scan.e_policy},
          {"e_mv_cm", c.scan.e_mv_cm},
          {"e_min_mv_cm", c.scan.e_min_mv_cm},
          {"e_max_mv_cm", c.scan.e_max_mv_cm},
          {"e_step_mv_cm", c.scan.e_step_mv_cm},
          {"window_start_pi", c.scan.window_start_pi},
          {"window_end_pi", c.scan.window_end_pi},
          {"window_samples", c.scan.window_samples},
          {"checkpoint", c.scan.checkpoint}}},
        {"output", {{"dir", c.output.dir}, {"format", c.output.format}}},
    };
}

inline std::string serialize_config(const ExperimentConfig& c) { return config_to_json(c).dump(2) + "\n"; }

/// Stable hash of the resolved config (key order is canonical in the dump).
inline std::string config_hash(const ExperimentConfig& c) { return detail::fnv1a_hex(config_to_json(c).dump()); }

/// Applies `key.path=value` overrides to scalar keys. The value is read as
/// JSON when possible (numbers, booleans, quoted strings) and as a bare
/// string otherwise.
inline void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not of the form key=value");
        const std::string path = o.substr(0, eq);
        const std::string text = o.substr(eq + 1);
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            value = text;
        }
        if (value.is_structured()) throw ConfigError("override '" + path + "' must be a scalar");
        nlohmann::json* node = &doc;
        std::stringstream ss(path);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(ss, part, '.')) parts.push_back(part);
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            if (!node->is_object()) throw ConfigError("override '" + path + "' descends into a non-section");
            node = &(*node)[parts[i]];
            if (node->is_null()) *node = nlohmann::json::object();
        }
        if (!node->is_object()) throw ConfigError("override '" + path + "' descends into a non-section");
        auto& slot = (*node)[parts.back()];
        if (slot.is_structured()) throw ConfigError("override '" + path + "' targets a list or section, not a scalar");
        slot = value;
    }
}

inline nlohmann::json parse_config_text(const std::string& text, const std::string& origin) {
    try {
        return nlohmann::json::parse(text, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        std::ostringstream os;
        os << origin << " line " << detail::line_of_byte(text, e.byte) << ": " << e.what();
        throw ConfigError(os.str());
    }
}

inline ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    auto doc = parse_config_text(ss.str(), path);
    apply_overrides(doc, overrides);
    return config_from_json(doc);
}

}  // namespace rydmap
