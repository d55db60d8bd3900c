#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydmap/errors.hpp"
#include "rydmap/linalg.hpp"
#include "rydmap/pair_interaction.hpp"
#include "rydmap/spin_dynamics.hpp"

namespace rydmap {

/// Two laser-driven atoms with the full multilevel Rydberg structure:
/// |gg>, |g s>, |s g> for every single-atom state s that pairs with the
/// laser target inside the pair basis, and all pair states. The laser couples
/// |g> to the target |r> with Omega/2; the rotating frame follows the
/// field-shifted single-atom resonance.
class TwoAtomFullModel {
public:
    TwoAtomFullModel(const PairBasis& basis, const AtomicStructure& atom, const FieldConfig& fields,
                     const Geometry& geometry, int max_multipole, bool include_interaction = true)
        : TwoAtomFullModel(basis, atom,
                           PairHamiltonian(basis, atom, fields, geometry.theta_rad, max_multipole, SectorMode::full),
                           geometry.r_um, include_interaction) {}

    /// Reuses a pair Hamiltonian built in the full sector at the model's
    /// fields and angle.
    TwoAtomFullModel(const PairBasis& basis, const AtomicStructure& atom, const PairHamiltonian& h, double r_um,
                     bool include_interaction = true) {
        if (h.symmetric()) throw ConfigError("the two-atom model needs the full pair sector");
        Geometry{r_um, h.theta()}.validate();
        const FieldConfig& fields = h.fields();
        const PairState& target = basis.target;
        if (target.a != target.b) throw ConfigError("the two-atom model needs both atoms driven to the same state");
        const auto ti = basis.single_index(target.a);
        if (!ti) throw ConfigError("pair basis lacks the laser-target state");
        target_single_ = *ti;

        // single-atom states reachable by de-exciting one atom of a pair state (r, s)
        for (int s = 0; s < static_cast<int>(basis.singles.size()); ++s) {
            if (basis.find(target_single_, s)) singles_.push_back(s);
        }
        std::vector<AtomicState> single_states;
        for (int s : singles_) single_states.push_back(basis.singles[static_cast<std::size_t>(s)]);
        const double e_r0 = atom.energy_mhz(target.a);
        const Eigen::MatrixXd h1 = single_atom_hamiltonian(single_states, fields, atom, e_r0);

        const auto r_pos = static_cast<Eigen::Index>(
            std::find(singles_.begin(), singles_.end(), target_single_) - singles_.begin());
        const auto single_eig = linalg::eigh(h1, true);
        Eigen::Index best = 0;
        for (Eigen::Index k = 0; k < single_eig.values.size(); ++k) {
            if (std::abs(single_eig.vectors(r_pos, k)) > std::abs(single_eig.vectors(r_pos, best))) best = k;
        }
        single_reference_mhz_ = single_eig.values(best);

        pair_reference_mhz_ = h.reference_mhz();
        const Eigen::MatrixXd hp = include_interaction ? h.matrix(r_um) : h.field_part();

        const auto ns = static_cast<Eigen::Index>(singles_.size());
        const auto np = hp.rows();
        const Eigen::Index dim = 1 + 2 * ns + np;
        pair_offset_ = 1 + 2 * ns;
        single_count_ = ns;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
        const double ref = single_reference_mhz_;
        H.block(1, 1, ns, ns) = h1 - ref * Eigen::MatrixXd::Identity(ns, ns);
        H.block(1 + ns, 1 + ns, ns, ns) = H.block(1, 1, ns, ns);
        H.block(pair_offset_, pair_offset_, np, np) = hp - 2.0 * ref * Eigen::MatrixXd::Identity(np, np);

        // laser couplings, in units of Omega/2; stored separately so one
        // diagonalisation per Rabi frequency suffices
        coupling_ = Eigen::MatrixXd::Zero(dim, dim);
        auto link = [&](Eigen::Index i, Eigen::Index j) { coupling_(i, j) = coupling_(j, i) = 1.0; };
        link(0, 1 + r_pos);       // |gg> -> |g r>
        link(0, 1 + ns + r_pos);  // |gg> -> |r g>
        for (Eigen::Index k = 0; k < ns; ++k) {
            const int s = singles_[static_cast<std::size_t>(k)];
            if (auto p = basis.find(target_single_, s)) link(1 + k, pair_offset_ + static_cast<Eigen::Index>(*p));
            if (auto p = basis.find(s, target_single_)) link(1 + ns + k, pair_offset_ + static_cast<Eigen::Index>(*p));
        }
        static_part_ = std::move(H);
    }

    Eigen::Index dimension() const { return static_part_.rows(); }
    std::size_t single_states() const { return singles_.size(); }
    double single_reference_mhz() const { return single_reference_mhz_; }
    double pair_reference_mhz() const { return pair_reference_mhz_; }

    Eigen::MatrixXd hamiltonian(double omega_mhz) const { return static_part_ + 0.5 * omega_mhz * coupling_; }

    /// Exact propagation by one eigendecomposition, recorded at the given times.
    /// Observables follow the two-atom configuration picture: an atom in any
    /// Rydberg level counts as excited.
    QuenchTrajectory evolve(double omega_mhz, const std::vector<double>& times_us) const {
        const auto eig = linalg::eigh(hamiltonian(omega_mhz), true);
        const Eigen::VectorXd c0 = eig.vectors.row(0).transpose();  // V^T |gg>
        QuenchTrajectory traj;
        const auto dim = dimension();
        for (double t : times_us) {
            if (t < 0) throw ConfigError("record times must be >= 0");
            Eigen::VectorXd re(dim), im(dim);
            for (Eigen::Index k = 0; k < dim; ++k) {
                const double phase = -2.0 * constants::pi * eig.values(k) * t;
                re(k) = c0(k) * std::cos(phase);
                im(k) = c0(k) * std::sin(phase);
            }
            const Eigen::VectorXd psi_re = eig.vectors * re;
            const Eigen::VectorXd psi_im = eig.vectors * im;
            const Eigen::VectorXd prob = psi_re.array().square() + psi_im.array().square();
            const double p_gg = prob(0);
            double p_single = 0.0, p_pair = 0.0;
            double p_a = 0.0, p_b = 0.0;  // atom 1 / atom 2 excited with the other in g
            for (Eigen::Index k = 1; k < 1 + single_count_; ++k) p_b += prob(k);
            for (Eigen::Index k = 1 + single_count_; k < pair_offset_; ++k) p_a += prob(k);
            p_single = p_a + p_b;
            for (Eigen::Index k = pair_offset_; k < dim; ++k) p_pair += prob(k);
            Observables o;
            o.f_r = (p_single + 2.0 * p_pair) / 2.0;
            o.p_kplus = {p_gg + p_single + p_pair, p_single + p_pair, p_pair};
            o.occupation = {p_a + p_pair, p_b + p_pair};
            traj.times_us.push_back(t);
            traj.pulse_areas.push_back(2.0 * constants::pi * omega_mhz * t);
            traj.points.push_back(std::move(o));
            traj.norm_errors.push_back(std::abs(p_gg + p_single + p_pair - 1.0));
        }
        return traj;
    }

private:
    int target_single_ = 0;
    std::vector<int> singles_;
    double single_reference_mhz_ = 0.0;
    double pair_reference_mhz_ = 0.0;
    Eigen::Index pair_offset_ = 0;
    Eigen::Index single_count_ = 0;
    Eigen::MatrixXd static_part_;
    Eigen::MatrixXd coupling_;
};

/// Convenience wrapper matching the spin-model interface.
inline QuenchTrajectory evolve_two_atom_full_model(const PairBasis& basis, const AtomicStructure& atom,
                                                   const FieldConfig& fields, const Geometry& geometry,
                                                   int max_multipole, double omega_mhz,
                                                   const std::vector<double>& times_us) {
    return TwoAtomFullModel(basis, atom, fields, geometry, max_multipole).evolve(omega_mhz, times_us);
}

/// Spin-1/2 pair with a single interaction value U (MHz).
inline SpinModel two_atom_spin_model(double r_um, double theta_rad, double omega_mhz, double u_mhz) {
    SpinModel m;
    m.lattice = Lattice::explicit_sites({{0.0, 0.0}, {r_um * std::sin(theta_rad), r_um * std::cos(theta_rad)}});
    m.omega_mhz = omega_mhz;
    m.couplings_mhz = {{0.0, u_mhz}, {u_mhz, 0.0}};
    return m;
}

}  // namespace rydmap
