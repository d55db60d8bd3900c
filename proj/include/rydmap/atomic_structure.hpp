#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "rydmap/angular.hpp"
#include "rydmap/atomic_state.hpp"
#include "rydmap/constants.hpp"
#include "rydmap/errors.hpp"

namespace rydmap {

// ---------------------------------------------------------------------------
// Level energies

/// Effective principal quantum number n* = n - delta(n).
inline double effective_n(const AtomicState& s, const DefectTable& defects) {
    const auto ch = defects.channel(s.l, s.j2);
    if (s.n < ch.valid_n_min)
        throw DataError("n=" + std::to_string(s.n) + " is below the validity range (n >= " +
                        std::to_string(ch.valid_n_min) + ") of channel l=" + std::to_string(s.l));
    const double nstar = s.n - ch.defect(s.n);
    if (!(nstar > 0)) throw DataError("non-positive effective quantum number for " + s.label());
    return nstar;
}

/// Level energy E/h in GHz relative to the ionisation threshold.
inline double state_energy_ghz(const AtomicState& s, const DefectTable& defects) {
    const double nstar = effective_n(s, defects);
    return -defects.rydberg_ghz() / (nstar * nstar);
}

inline double state_energy_mhz(const AtomicState& s, const DefectTable& defects) {
    return 1e3 * state_energy_ghz(s, defects);
}

// ---------------------------------------------------------------------------
// Radial wavefunctions

/// Numerov grid in the scaled coordinate x = sqrt(r). All wavefunctions share
/// the global lattice x_i = i * step so overlaps need no interpolation.
struct GridSpec {
    double step = 0.01;
    double inner_fraction = 1e-3;  // r_inner = inner_fraction * n*^2 (Bohr radii)
    double outer_padding = 15.0;   // r_outer = 2 n* (n* + outer_padding)
};

/// Reduced radial wavefunction u(r) = sqrt(x) X(x), sampled as X on x = i * step.
struct RadialSolution {
    double step = 0.01;
    long first_index = 0;         // x of the first sample is first_index * step
    std::vector<double> x_values; // X(x) samples
    int n_nodes = 0;
    double nstar = 0.0;

    std::size_t size() const { return x_values.size(); }
    double x_at(std::size_t k) const { return (first_index + static_cast<long>(k)) * step; }
    double r_at(std::size_t k) const { const double x = x_at(k); return x * x; }

    /// u(r) at sample k.
    double u_at(std::size_t k) const { return std::sqrt(x_at(k)) * x_values[k]; }

    /// grid of r samples
    std::vector<double> grid() const {
        std::vector<double> g(size());
        for (std::size_t k = 0; k < size(); ++k) g[k] = r_at(k);
        return g;
    }

    /// <r^p> = int u^2 r^p dr
    double expectation_r(int power) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < size(); ++k) {
            const double x = x_at(k);
            acc += 2.0 * std::pow(x, 2 * power + 2) * x_values[k] * x_values[k];
        }
        return acc * step;
    }
};

/// Integrates the Coulomb radial equation with effective quantum number
/// n* inward from beyond the outer turning point. The irregular growth near
/// the core (non-integer n*) is cut at the first minimum of |X| inside the
/// inner turning point.
inline RadialSolution numerov_coulomb(double nstar, int l, const GridSpec& spec = {}) {
    const double h = spec.step;
    const double energy = -0.5 / (nstar * nstar);
    const double r_outer = 2.0 * nstar * (nstar + spec.outer_padding);
    const double r_inner = std::max(spec.inner_fraction * nstar * nstar, 1e-12);
    const long i_max = static_cast<long>(std::ceil(std::sqrt(r_outer) / h));
    const long i_min = std::max(1L, static_cast<long>(std::floor(std::sqrt(r_inner) / h)));
    if (i_max - i_min < 16) throw NumericalError("radial grid too small for n*=" + std::to_string(nstar));

    const double cl = (2.0 * l + 0.5) * (2.0 * l + 1.5);
    auto g = [&](long i) {
        const double x = i * h;
        const double x2 = x * x;
        return 8.0 * x2 * (-1.0 / x2 - energy) + cl / x2;
    };
    // innermost point where the local wavenumber vanishes, scanning inward from the
    // classically allowed region
    const double r_turn_inner = [&] {
        // 8 x^2 (V - E) + cl/x^2 = 0  <=> 8 r(-1/r - E) + cl / r = 0  <=> -8E r^2 - 8 r + cl = 0
        const double a = -8.0 * energy, b = -8.0, c = cl;
        const double disc = b * b - 4 * a * c;
        if (disc <= 0) return 0.0;
        return (-b - std::sqrt(disc)) / (2 * a);
    }();
    const double x_turn_inner = std::sqrt(std::max(r_turn_inner, 0.0));

    const std::size_t count = static_cast<std::size_t>(i_max - i_min + 1);
    std::vector<double> xs(count, 0.0);
    const double h12 = h * h / 12.0;
    xs[count - 1] = 0.0;
    xs[count - 2] = 1e-10;
    std::size_t cut = 0;
    for (std::size_t k = count - 2; k >= 1; --k) {
        const long i = i_min + static_cast<long>(k);
        const double next = (2.0 * (1.0 + 5.0 * h12 * g(i)) * xs[k] - (1.0 - h12 * g(i + 1)) * xs[k + 1]) /
                            (1.0 - h12 * g(i - 1));
        xs[k - 1] = next;
        const double x = (i - 1) * h;
        if (x < x_turn_inner && std::abs(next) > std::abs(xs[k])) {
            cut = k;
            break;
        }
        if (!std::isfinite(next)) {
            std::ostringstream os;
            os << "Numerov integration diverged at x=" << x << " (r=" << x * x << ", n*=" << nstar << ", l=" << l
               << ", step=" << h << ")";
            throw NumericalError(os.str());
        }
    }
    RadialSolution sol;
    sol.step = h;
    sol.first_index = i_min + static_cast<long>(cut);
    sol.x_values.assign(xs.begin() + static_cast<long>(cut), xs.end());
    sol.nstar = nstar;

    double norm = 0.0;
    for (std::size_t k = 0; k < sol.size(); ++k) {
        const double x = sol.x_at(k);
        norm += 2.0 * x * x * sol.x_values[k] * sol.x_values[k];
    }
    norm *= h;
    if (!(norm > 0) || !std::isfinite(norm)) {
        std::ostringstream os;
        os << "radial wavefunction normalisation failed (n*=" << nstar << ", l=" << l << ", points=" << sol.size()
           << ", r_inner=" << sol.r_at(0) << ")";
        throw NumericalError(os.str());
    }
    const double scale = 1.0 / std::sqrt(norm);
    for (double& v : sol.x_values) v *= scale;

    // nodes are counted only where the amplitude is not negligible, which skips
    // the spurious sign flip of the truncated core region
    double peak = 0.0;
    for (double v : sol.x_values) peak = std::max(peak, std::abs(v));
    int nodes = 0;
    int last_sign = 0;
    for (double v : sol.x_values) {
        if (std::abs(v) < 1e-4 * peak) continue;
        const int s = v > 0 ? 1 : -1;
        if (last_sign != 0 && s != last_sign) ++nodes;
        last_sign = s;
    }
    sol.n_nodes = nodes;
    return sol;
}

inline RadialSolution radial_wavefunction(const AtomicState& s, const DefectTable& defects,
                                          const GridSpec& spec = {}) {
    return numerov_coulomb(effective_n(s, defects), s.l, spec);
}

/// int u1 r^power u2 dr over the overlap of the two grids, in Bohr radii^power.
inline double radial_integral(const RadialSolution& a, const RadialSolution& b, int power) {
    if (std::abs(a.step - b.step) > 1e-14 * a.step)
        throw NumericalError("radial grids use different steps; cannot integrate without interpolation");
    const long lo = std::max(a.first_index, b.first_index);
    const long hi = std::min(a.first_index + static_cast<long>(a.size()), b.first_index + static_cast<long>(b.size()));
    double acc = 0.0;
    const double h = a.step;
    for (long i = lo; i < hi; ++i) {
        const double x = i * h;
        const double x2 = x * x;
        acc += 2.0 * std::pow(x2, power + 1) * a.x_values[static_cast<std::size_t>(i - a.first_index)] *
               b.x_values[static_cast<std::size_t>(i - b.first_index)];
    }
    return acc * h;
}

// ---------------------------------------------------------------------------
// Angular part

/// <l s j m_j | C^k_q | l' s j' m_j'> for a spin-1/2 electron.
inline double multipole_angular(const AtomicState& a, int k, int q, const AtomicState& b) {
    using namespace angular;
    const int k2 = 2 * k, q2 = 2 * q;
    if (a.mj2 != b.mj2 + q2) return 0.0;
    if ((a.l + b.l + k) % 2 != 0) return 0.0;
    const double three_l = wigner_3j(2 * a.l, k2, 2 * b.l, 0, 0, 0);
    if (three_l == 0.0) return 0.0;
    const double reduced_l = ((a.l % 2) ? -1.0 : 1.0) * std::sqrt((2.0 * a.l + 1) * (2.0 * b.l + 1)) * three_l;
    // (-1)^(l + s + j' + k)
    const int phase2 = 2 * a.l + 1 + b.j2 + k2;
    const double reduced_j = detail::parity_sign(phase2) * std::sqrt((a.j2 + 1.0) * (b.j2 + 1.0)) *
                             wigner_6j(2 * a.l, a.j2, 1, b.j2, 2 * b.l, k2) * reduced_l;
    return detail::parity_sign(a.j2 - a.mj2) * wigner_3j(a.j2, k2, b.j2, -a.mj2, q2, b.mj2) * reduced_j;
}

// ---------------------------------------------------------------------------
// Structure provider with cached radial data

/// Computes and caches radial wavefunctions and radial integrals for one
/// species. Thread-safe: the caches are guarded by a mutex.
class AtomicStructure {
public:
    explicit AtomicStructure(DefectTable defects, GridSpec grid = {})
        : defects_(std::move(defects)), grid_(grid) {}

    const DefectTable& defects() const { return defects_; }
    const GridSpec& grid() const { return grid_; }

    double energy_mhz(const AtomicState& s) const { return state_energy_mhz(s, defects_); }

    std::shared_ptr<const RadialSolution> radial(const AtomicState& s) const {
        const auto key = std::tuple{s.n, s.l, s.j2};
        {
            std::lock_guard lock(mutex_);
            if (auto it = wavefunctions_.find(key); it != wavefunctions_.end()) return it->second;
        }
        auto sol = std::make_shared<const RadialSolution>(radial_wavefunction(s, defects_, grid_));
        std::lock_guard lock(mutex_);
        return wavefunctions_.try_emplace(key, std::move(sol)).first->second;
    }

    /// Radial matrix element <n l j| r^power |n' l' j'> in Bohr radii^power.
    double radial_element(const AtomicState& a, const AtomicState& b, int power) const {
        auto ka = std::tuple{a.n, a.l, a.j2};
        auto kb = std::tuple{b.n, b.l, b.j2};
        if (kb < ka) std::swap(ka, kb);
        const auto key = std::tuple{ka, kb, power};
        {
            std::lock_guard lock(mutex_);
            if (auto it = integrals_.find(key); it != integrals_.end()) return it->second;
        }
        const double value = radial_integral(*radial(a), *radial(b), power);
        std::lock_guard lock(mutex_);
        integrals_.try_emplace(key, value);
        return value;
    }

    /// <a| r^k C^k_q |b> in atomic units.
    double multipole_element(const AtomicState& a, int k, int q, const AtomicState& b) const {
        const double ang = multipole_angular(a, k, q, b);
        if (ang == 0.0) return 0.0;
        return ang * radial_element(a, b, k);
    }

private:
    using NljKey = std::tuple<int, int, int>;
    DefectTable defects_;
    GridSpec grid_;
    mutable std::mutex mutex_;
    mutable std::map<NljKey, std::shared_ptr<const RadialSolution>> wavefunctions_;
    mutable std::map<std::tuple<NljKey, NljKey, int>, double> integrals_;
};

// ---------------------------------------------------------------------------
// Single-atom Hamiltonian

/// Lande factor with g_L = 1 and g_S = 2.
inline double lande_g(const AtomicState& s) {
    const double j = s.j(), l = s.l;
    return 1.0 + (j * (j + 1) + 0.75 - l * (l + 1)) / (2.0 * j * (j + 1));
}

inline double zeeman_shift_mhz(const AtomicState& s, double b_gauss) {
    return lande_g(s) * s.mj() * constants::mu_b_mhz_per_gauss * b_gauss;
}

/// Field-free energies plus linear Zeeman and Stark terms, fields along z.
/// Energies are absolute (relative to threshold) in MHz unless an offset is
/// given, in which case it is subtracted from the diagonal.
inline Eigen::MatrixXd single_atom_hamiltonian(std::span<const AtomicState> basis, const FieldConfig& fields,
                                               const AtomicStructure& atom, double energy_offset_mhz = 0.0) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    const double e_au = constants::mv_per_cm_to_au(fields.e_mv_cm);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& a = basis[static_cast<std::size_t>(i)];
        h(i, i) = atom.energy_mhz(a) - energy_offset_mhz + zeeman_shift_mhz(a, fields.b_gauss);
        if (e_au == 0.0) continue;
        for (Eigen::Index k = 0; k < i; ++k) {
            const auto& b = basis[static_cast<std::size_t>(k)];
            if (a.mj2 != b.mj2 || std::abs(a.l - b.l) != 1) continue;
            const double v = e_au * atom.multipole_element(a, 1, 0, b) * constants::hartree_mhz;
            h(i, k) = v;
            h(k, i) = v;
        }
    }
    return h;
}

}  // namespace rydmap
