#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rydmap/blockade.hpp"
#include "rydmap/config.hpp"
#include "rydmap/effective_potential.hpp"
#include "rydmap/io.hpp"
#include "rydmap/scan.hpp"
#include "rydmap/spin_dynamics.hpp"
#include "rydmap/two_atom_model.hpp"

#ifndef RYDMAP_DEFAULT_DATA_DIR
#define RYDMAP_DEFAULT_DATA_DIR "data"
#endif

namespace rydmap {

/// Relative data paths resolve against RYDMAP_DATA_DIR when set, otherwise
/// against the data directory of the source tree.
inline std::filesystem::path resolve_data_file(const std::string& file) {
    const std::filesystem::path p(file);
    if (p.is_absolute()) return p;
    const char* env = std::getenv("RYDMAP_DATA_DIR");
    const std::filesystem::path dir = env && *env ? std::filesystem::path(env) : std::filesystem::path(RYDMAP_DEFAULT_DATA_DIR);
    return dir / p;
}

struct RunOptions {
    Parallelism workers;
    std::string output_dir;  // overrides config.output.dir when non-empty
};

inline CurveSettings curve_settings(const ExperimentConfig& c) {
    CurveSettings s;
    s.r_min_um = c.curve.r_min_um;
    s.r_max_um = c.curve.r_max_um;
    s.r_step_um = c.curve.r_step_um;
    s.fit_r_min_um = c.curve.fit_r_min_um;
    s.max_multipole = c.basis.max_multipole;
    return s;
}

/// Blockade graph used to truncate a spin simulation. "neighbours" excludes
/// nearest neighbours on a ring, nearest and diagonal neighbours on a square
/// grid, and nothing otherwise.
inline BlockadeGraph truncation_graph(const ExperimentConfig& c, const SpinModel& model) {
    const int n = model.atoms();
    if (c.spin.truncation == "none") return BlockadeGraph(n);
    if (c.spin.truncation == "blockade") return build_blockade_graph(model.couplings_mhz, model.omega_mhz, c.spin.blockade_factor);
    if (c.lattice.kind == "ring") return distance_graph(model.lattice, c.lattice.spacing_um * 1.01);
    if (c.lattice.kind == "square") return distance_graph(model.lattice, c.lattice.spacing_um * std::sqrt(2.0) * 1.01);
    return BlockadeGraph(n);
}

/// The graph depends on the couplings only for the "blockade" truncation.
inline bool truncation_is_geometric(const ExperimentConfig& c) { return c.spin.truncation != "blockade"; }

inline SpinModel spin_model_from_config(const ExperimentConfig& c, EffectivePotential& potential,
                                        Parallelism workers) {
    const Lattice lattice = c.make_lattice();
    std::vector<double> thetas;
    for (std::size_t i = 0; i < lattice.size(); ++i)
        for (std::size_t j = i + 1; j < lattice.size(); ++j) thetas.push_back(lattice.theta(i, j));
    potential.prepare(thetas, workers);
    return SpinModel::from_potential(lattice, c.omega_mhz, [&](double r, double t) { return potential(r, t); });
}

/// Executes one configured pipeline and writes its artifacts plus manifest.json.
inline RunManifest run(const ExperimentConfig& config, const RunOptions& opt = {}) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    RunManifest m;
    m.mode = config.mode;
    m.config_hash = config_hash(config);

    const auto data_path = resolve_data_file(config.data_file);
    auto atom = std::make_shared<const AtomicStructure>(DefectTable::load(data_path.string()));
    m.data_file = data_path.string();
    m.data_version = atom->defects().version();

    ArtifactWriter w(opt.output_dir.empty() ? config.output.dir : opt.output_dir, m.config_hash, config.output.format);
    w.write_text("config.resolved.json", serialize_config(config));

    const AtomicState r = config.target.state();
    auto build_basis = [&] {
        auto b = std::make_shared<const PairBasis>(build_pair_basis({r, r}, config.basis.cutoffs(), *atom));
        m.basis_sizes["pair_states"] = b->size();
        m.basis_sizes["single_states"] = b->singles.size();
        return b;
    };
    const auto areas = config.record_pulse_areas();

    if (config.mode == "pair-spectrum") {
        const auto basis = build_basis();
        const SectorMode sector = config.spectrum.sector == "full"        ? SectorMode::full
                                  : config.spectrum.sector == "symmetric" ? SectorMode::symmetric
                                                                          : SectorMode::automatic;
        const PairHamiltonian h(*basis, *atom, config.fields, config.theta_rad(), config.basis.max_multipole, sector);
        m.basis_sizes["sector_dimension"] = h.dimension();
        const auto grid = linear_grid(config.spectrum.r_min_um, config.spectrum.r_max_um, config.spectrum.r_step_um);
        const auto spectrum = pair_spectrum(h, grid, true, opt.workers);
        ResonanceOptions ro{config.spectrum.resonance_window_mhz, config.spectrum.overlap_threshold,
                            config.spectrum.refine_tolerance_um};
        const auto res = find_resonant_distances(spectrum, ro, [&](double x) { return diagonalize_at(h, x, true); });
        m.warnings.insert(m.warnings.end(), res.warnings.begin(), res.warnings.end());
        write_spectrum(w, spectrum, config.theta_rad(), config.fields, res);
    } else if (config.mode == "c6") {
        const auto basis = build_basis();
        std::vector<double> thetas;
        for (double t : config.curve.theta_deg) thetas.push_back(t * constants::pi / 180.0);
        const auto profile =
            c6_angular_profile(*basis, *atom, config.fields, thetas, config.curve.r_eval_um, curve_settings(config), opt.workers);
        for (const auto& e : profile) {
            if (!e.error.empty()) m.warnings.push_back("theta=" + std::to_string(to_deg(e.theta_rad)) + " deg: " + e.error);
        }
        write_c6_profile(w, profile, config.curve.r_eval_um);
    } else if (config.mode == "quench-spin") {
        ResourceBudget budget;
        budget.max_bytes = static_cast<std::uint64_t>(config.spin.memory_budget_gib * double(std::uint64_t{1} << 30));
        // a geometric truncation is sized before any pair curve is computed,
        // so an oversized request fails fast
        std::optional<TruncatedBasis> early;
        if (truncation_is_geometric(config)) {
            SpinModel shape;
            shape.lattice = config.make_lattice();
            early = enumerate_truncated_basis(truncation_graph(config, shape), budget);
        }
        const auto basis = build_basis();
        EffectivePotential potential(basis, atom, config.fields, curve_settings(config));
        const SpinModel model = spin_model_from_config(config, potential, opt.workers);
        const auto configs = early ? std::move(*early) : enumerate_truncated_basis(truncation_graph(config, model), budget);
        const auto& graph = configs.graph;
        m.basis_sizes["atoms"] = model.atoms();
        m.basis_sizes["blockade_edges"] = graph.edges.size();
        m.basis_sizes["configurations"] = configs.size();
        EvolutionOptions eo;
        eo.dt_us = config.time.dt_us;
        eo.store_states = config.spin.dump_configurations;
        eo.budget = opt.workers;
        const auto times = times_for_pulse_areas(config.omega_mhz, areas);
        const auto traj = evolve_spin_model(model, configs, times.back(), times, eo);
        write_trajectory(w, traj);
        if (config.spin.dump_configurations) write_configuration_dump(w, traj, configs);
        nlohmann::json couplings = w.header("couplings");
        couplings["U_MHz"] = model.couplings_mhz;
        nlohmann::json sites = nlohmann::json::array();
        for (const auto& s : model.lattice.sites) sites.push_back({s.x, s.z});
        couplings["sites_um"] = sites;
        nlohmann::json edges = nlohmann::json::array();
        for (const auto& [i, j] : graph.edges) edges.push_back({i, j});
        couplings["truncated_edges"] = edges;
        w.write_json("couplings.json", couplings);
    } else if (config.mode == "quench-full") {
        const auto basis = build_basis();
        const TwoAtomFullModel full(*basis, *atom, config.fields, config.pair_geometry(), config.basis.max_multipole);
        m.basis_sizes["two_atom_dimension"] = full.dimension();
        const auto times = times_for_pulse_areas(config.omega_mhz, areas);
        write_trajectory(w, full.evolve(config.omega_mhz, times));
        // spin-1/2 reference with the tracked effective potential at the same fields
        auto settings = curve_settings(config);
        settings.r_min_um = std::min(settings.r_min_um, config.geometry.r_um);
        const EffectivePotential potential(basis, atom, config.fields, settings);
        const double u = potential(config.geometry.r_um, config.theta_rad());
        const SpinModel spin = two_atom_spin_model(config.geometry.r_um, config.theta_rad(), config.omega_mhz, u);
        EvolutionOptions eo;
        eo.dt_us = config.time.dt_us;
        write_trajectory(w, evolve_spin_model(spin, full_basis(2), times.back(), times, eo), "trajectory_spin");
        for (const auto& warn : potential.curve(config.theta_rad()).warnings) m.warnings.push_back(warn);
    } else if (config.mode == "scan") {
        const auto basis = build_basis();
        const auto spec = config.scan_spec();
        const std::string ck = config.scan.checkpoint.empty() ? (w.dir / "scan_checkpoint.jsonl").string()
                                                               : config.scan.checkpoint;
        ScanCheckpoint checkpoint(ck, m.config_hash);
        const auto result = grid_scan(spec, *basis, *atom, &checkpoint, opt.workers);
        for (const auto& p : result.points) {
            if (!p.ok()) m.warnings.push_back(p.error);
            if (p.dimension) m.basis_sizes["two_atom_dimension"] = p.dimension;
        }
        write_scan(w, result);
    }

    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto artifacts = w.written;
    w.write_json("manifest.json", m.to_json(artifacts));
    return m;
}

}  // namespace rydmap
