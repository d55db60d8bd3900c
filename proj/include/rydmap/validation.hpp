#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydmap/angular.hpp"
#include "rydmap/atomic_structure.hpp"
#include "rydmap/blockade.hpp"
#include "rydmap/pair_interaction.hpp"
#include "rydmap/spin_dynamics.hpp"
#include "rydmap/two_atom_model.hpp"

namespace rydmap {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

/// Exact propagation of the spin model in the full 2^N basis by dense
/// diagonalisation; amplitudes at time t from the all-ground state.
inline std::vector<cplx> dense_spin_state(const SpinModel& model, double t_us) {
    const int n = model.atoms();
    const Eigen::Index dim = Eigen::Index{1} << n;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
        h(c, c) = model.energy(static_cast<Config>(c));
        for (int i = 0; i < n; ++i) h(c, c ^ (Eigen::Index{1} << i)) = 0.5 * model.omega_mhz;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    std::vector<cplx> out(static_cast<std::size_t>(dim));
    for (Eigen::Index c = 0; c < dim; ++c) {
        cplx a = 0.0;
        for (Eigen::Index k = 0; k < dim; ++k)
            a += es.eigenvectors()(c, k) * es.eigenvectors()(0, k) *
                 std::exp(cplx(0.0, -2.0 * constants::pi * es.eigenvalues()(k) * t_us));
        out[static_cast<std::size_t>(c)] = a;
    }
    return out;
}

}  // namespace detail

/// Quick invariant suite behind the `validate` CLI mode. Each check is
/// small enough to run in seconds.
inline std::vector<CheckResult> run_invariant_suite(const AtomicStructure& atom) {
    std::vector<CheckResult> out;
    auto record = [&](std::string name, const std::function<std::string(bool&)>& body) {
        CheckResult r{std::move(name), false, {}};
        try {
            r.detail = body(r.pass);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        out.push_back(std::move(r));
    };

    record("hydrogenic energies and <r>", [](bool& pass) {
        const AtomicStructure h(DefectTable::hydrogenic());
        double worst_e = 0.0, worst_r = 0.0;
        for (int n : {1, 5, 20, 61}) {
            for (int l : {0, n - 1}) {
                const auto s = AtomicState::make(n, l, l + 0.5, 0.5);
                const double exact = -constants::rydberg_inf_ghz * 1e3 / (n * n);
                worst_e = std::max(worst_e, std::abs(h.energy_mhz(s) / exact - 1.0));
                const double r_exact = (3.0 * n * n - l * (l + 1.0)) / 2.0;
                worst_r = std::max(worst_r, std::abs(h.radial(s)->expectation_r(1) / r_exact - 1.0));
            }
        }
        pass = worst_e < 1e-10 && worst_r < 1e-4;
        std::ostringstream os;
        os << "max rel energy error " << worst_e << ", max rel <r> error " << worst_r;
        return os.str();
    });

    record("3j orthogonality", [](bool& pass) {
        double worst = 0.0;
        for (int j1 : {2, 3, 4}) {
            for (int j2 : {2, 5}) {
                for (int j3 = std::abs(j1 - j2); j3 <= j1 + j2; j3 += 2) {
                    for (int m3 = -j3; m3 <= j3; m3 += 2) {
                        double s = 0.0;
                        for (int m1 = -j1; m1 <= j1; m1 += 2) {
                            const double w = angular::wigner_3j(j1, j2, j3, m1, -m1 - m3, m3);
                            s += w * w;
                        }
                        worst = std::max(worst, std::abs((j3 + 1) * s - 1.0));
                    }
                }
            }
        }
        pass = worst < 1e-12;
        return "max deviation " + std::to_string(worst);
    });

    record("independent sets of the 8-cycle", [](bool& pass) {
        BlockadeGraph g(8);
        for (int i = 0; i < 8; ++i) g.add_edge(i, (i + 1) % 8);
        std::uint64_t brute = 0;
        for (Config c = 0; c < 256; ++c) brute += g.independent(c);
        const auto basis = enumerate_truncated_basis(g);
        pass = brute == 47 && count_independent_sets(g) == 47 && basis.size() == 47;
        return "count " + std::to_string(basis.size());
    });

    record("single-atom Rabi pi pulse", [](bool& pass) {
        SpinModel m;
        m.lattice = Lattice::explicit_sites({{0.0, 0.0}});
        m.omega_mhz = 1.2;
        m.couplings_mhz = {{0.0}};
        const auto t = times_for_pulse_areas(m.omega_mhz, {constants::pi});
        const auto tr = evolve_spin_model(m, full_basis(1), t.back(), t);
        const double p = tr.points.back().f_r;
        pass = std::abs(p - 1.0) < 1e-6;
        return "P_r(pi) = " + std::to_string(p);
    });

    record("split-step vs dense propagation", [](bool& pass) {
        SpinModel m;
        m.lattice = Lattice::ring(5, 6.5);
        m.omega_mhz = 1.2;
        m.couplings_mhz.assign(5, std::vector<double>(5, 0.0));
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) m.couplings_mhz[i][j] = m.couplings_mhz[j][i] = -3.0 / (1 + std::abs(i - j));
        const double t_final = 4.0 * constants::pi / (2.0 * constants::pi * m.omega_mhz);
        EvolutionOptions eo;
        eo.store_states = true;
        eo.dt_us = 1e-4;
        const auto tr = evolve_spin_model(m, full_basis(5), t_final, {t_final}, eo);
        const auto exact = detail::dense_spin_state(m, t_final);
        double worst = 0.0;
        for (std::size_t k = 0; k < exact.size(); ++k) worst = std::max(worst, std::abs(exact[k] - tr.states.back()[k]));
        pass = worst < 1e-6;
        std::ostringstream os;
        os << "max amplitude error " << worst;
        return os.str();
    });

    record("two independent atoms: P_rr = sin^4", [&](bool& pass) {
        const auto r = AtomicState::make(61, 2, 1.5, 1.5);
        const auto basis = build_pair_basis({r, r}, BasisCutoffs{}, atom);
        const TwoAtomFullModel model(basis, atom, FieldConfig{3.5, 0.0}, Geometry{6.5, 78.0 * constants::pi / 180.0},
                                     2, false);
        std::vector<double> areas;
        for (int k = 0; k <= 16; ++k) areas.push_back(k * constants::pi / 2.0);
        const auto tr = model.evolve(1.2, times_for_pulse_areas(1.2, areas));
        double worst = 0.0;
        for (std::size_t i = 0; i < areas.size(); ++i)
            worst = std::max(worst, std::abs(tr.points[i].p_rr() - std::pow(std::sin(areas[i] / 2.0), 4)));
        pass = worst < 1e-6;
        std::ostringstream os;
        os << "max deviation " << worst;
        return os.str();
    });

    record("non-interacting limit at R = 20 um", [&](bool& pass) {
        const auto r = AtomicState::make(61, 2, 1.5, 1.5);
        const auto basis = build_pair_basis({r, r}, BasisCutoffs{}, atom);
        const PairHamiltonian h(basis, atom, FieldConfig{3.5, 0.0}, 78.0 * constants::pi / 180.0, 2);
        const auto p = diagonalize_at(h, 20.0, false);
        const auto k = p.dominant();
        pass = p.overlaps(k) > 0.99 && std::abs(p.detuning(k)) < 0.01;
        std::ostringstream os;
        os << "overlap " << p.overlaps(k) << ", shift " << p.detuning(k) * 1e3 << " kHz";
        return os.str();
    });

    return out;
}

}  // namespace rydmap
