#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rydmap/blockade.hpp"
#include "rydmap/constants.hpp"
#include "rydmap/errors.hpp"
#include "rydmap/lattice.hpp"
#include "rydmap/parallel.hpp"

namespace rydmap {

using cplx = std::complex<double>;

/// Ising model in a transverse field,
///   H/h = sum_i (Omega/2pi)/2 sigma_x^i - delta sum_i n_i + sum_{i<j} U_ij n_i n_j,
/// with every frequency in MHz (cycles) and times in microseconds.
struct SpinModel {
    Lattice lattice;
    double omega_mhz = 0.0;
    std::vector<std::vector<double>> couplings_mhz;
    double detuning_mhz = 0.0;

    int atoms() const { return static_cast<int>(lattice.size()); }

    void validate() const {
        lattice.validate();
        if (!std::isfinite(omega_mhz) || omega_mhz < 0) throw ConfigError("Rabi frequency must be finite and >= 0");
        const auto n = lattice.size();
        if (couplings_mhz.size() != n) throw ConfigError("coupling matrix size does not match the lattice");
        for (std::size_t i = 0; i < n; ++i) {
            if (couplings_mhz[i].size() != n) throw ConfigError("coupling matrix is not square");
            if (couplings_mhz[i][i] != 0.0) throw ConfigError("coupling matrix must have a zero diagonal");
            for (std::size_t j = 0; j < i; ++j) {
                if (couplings_mhz[i][j] != couplings_mhz[j][i]) throw ConfigError("coupling matrix must be symmetric");
            }
        }
    }

    /// Couplings U_ij = potential(R_ij, theta_ij).
    static SpinModel from_potential(const Lattice& lattice, double omega_mhz,
                                    const std::function<double(double, double)>& potential) {
        SpinModel m;
        m.lattice = lattice;
        m.omega_mhz = omega_mhz;
        const auto n = lattice.size();
        m.couplings_mhz.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double u = potential(lattice.distance(i, j), lattice.theta(i, j));
                m.couplings_mhz[i][j] = m.couplings_mhz[j][i] = u;
            }
        }
        m.validate();
        return m;
    }

    double max_coupling_mhz() const {
        double m = 0.0;
        for (const auto& row : couplings_mhz)
            for (double u : row) m = std::max(m, std::abs(u));
        return m;
    }

    /// Diagonal energy of a configuration, MHz.
    double energy(Config c) const {
        double e = -detuning_mhz * std::popcount(c);
        for (Config rest = c; rest != 0; rest &= rest - 1) {
            const int i = std::countr_zero(rest);
            for (Config other = rest & (rest - 1); other != 0; other &= other - 1) {
                const int j = std::countr_zero(other);
                e += couplings_mhz[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
        }
        return e;
    }
};

/// Observables at one recorded time.
struct Observables {
    double f_r = 0.0;
    std::vector<double> p_kplus;     // p_kplus[k] = P(at least k excitations), k = 0..N
    std::vector<double> occupation;  // <n_i>

    double p_rr() const { return p_kplus.size() > 2 ? p_kplus[2] : 0.0; }
};

inline Observables observables(const std::vector<cplx>& state, const TruncatedBasis& basis) {
    const int n = basis.atoms();
    Observables o;
    std::vector<double> exact(static_cast<std::size_t>(n + 1), 0.0);
    o.occupation.assign(static_cast<std::size_t>(n), 0.0);
    double excited = 0.0;
    for (std::size_t k = 0; k < basis.size(); ++k) {
        const double p = std::norm(state[k]);
        const Config c = basis.configs[k];
        const int pc = std::popcount(c);
        exact[static_cast<std::size_t>(pc)] += p;
        excited += p * pc;
        for (Config rest = c; rest != 0; rest &= rest - 1) o.occupation[static_cast<std::size_t>(std::countr_zero(rest))] += p;
    }
    o.f_r = n > 0 ? excited / n : 0.0;
    o.p_kplus.assign(static_cast<std::size_t>(n + 1), 0.0);
    double tail = 0.0;
    for (int k = n; k >= 0; --k) {
        tail += exact[static_cast<std::size_t>(k)];
        o.p_kplus[static_cast<std::size_t>(k)] = tail;
    }
    return o;
}

struct QuenchTrajectory {
    std::vector<double> times_us;
    std::vector<double> pulse_areas;  // Omega tau
    std::vector<Observables> points;
    std::vector<double> norm_errors;
    std::vector<std::vector<cplx>> states;  // only when requested

    std::size_t size() const { return times_us.size(); }

    std::vector<double> series(const std::function<double(const Observables&)>& f) const {
        std::vector<double> out;
        for (const auto& p : points) out.push_back(f(p));
        return out;
    }
    std::vector<double> f_r() const { return series([](const Observables& o) { return o.f_r; }); }
    std::vector<double> p_rr() const { return series([](const Observables& o) { return o.p_rr(); }); }
    std::vector<double> p_kplus(int k) const {
        return series([k](const Observables& o) {
            return k < static_cast<int>(o.p_kplus.size()) ? o.p_kplus[static_cast<std::size_t>(k)] : 0.0;
        });
    }
};

/// Times (us) at which the pulse area Omega tau takes the given values.
inline std::vector<double> times_for_pulse_areas(double omega_mhz, const std::vector<double>& areas) {
    if (!(omega_mhz > 0)) throw ConfigError("pulse areas need a positive Rabi frequency");
    std::vector<double> t;
    for (double a : areas) t.push_back(a / (2.0 * constants::pi * omega_mhz));
    return t;
}

/// Default step: 0.005 divided by the largest frequency in cycles (Omega or max |U|).
inline double default_time_step_us(const SpinModel& model) {
    const double f = std::max({model.omega_mhz, model.max_coupling_mhz(), std::abs(model.detuning_mhz), 1e-9});
    return 0.005 / f;
}

/// Same, but only counting couplings between atoms that the basis allows to
/// be excited together; blockaded pairs never acquire their phase.
inline double default_time_step_us(const SpinModel& model, const TruncatedBasis& basis) {
    double u = 0.0;
    const auto n = static_cast<std::size_t>(model.atoms());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (basis.graph.neighbours[i] & (Config{1} << j)) continue;
            u = std::max(u, std::abs(model.couplings_mhz[i][j]));
        }
    }
    const double f = std::max({model.omega_mhz, u, std::abs(model.detuning_mhz), 1e-9});
    return 0.005 / f;
}

struct EvolutionOptions {
    double dt_us = 0.0;  // 0 selects the default step
    bool store_states = false;
    double norm_tolerance = 1e-6;
    Parallelism budget{1};
};

/// Strang split-step propagator over a truncated configuration basis:
/// half-step drive, full-step diagonal phase, half-step drive. The drive
/// half-step is a symmetric product of exact single-site rotations; pairs of
/// configurations whose excited partner is outside the basis are left alone.
class SplitStepPropagator {
public:
    SplitStepPropagator(const SpinModel& model, const TruncatedBasis& basis, Parallelism budget = {1})
        : model_(model), basis_(basis), budget_(budget) {
        model_.validate();
        if (basis.atoms() != model.atoms()) throw ConfigError("basis and model have different atom counts");
        energies_.resize(basis.size());
        for (std::size_t k = 0; k < basis.size(); ++k) energies_[k] = model_.energy(basis.configs[k]);
        const int n = model.atoms();
        offsets_.assign(static_cast<std::size_t>(n + 1), 0);
        for (int i = 0; i < n; ++i) {
            const Config bit = Config{1} << i;
            for (std::size_t k = 0; k < basis.size(); ++k) {
                const Config c = basis.configs[k];
                if (c & bit) continue;
                const auto hi = basis.index_of(c | bit);
                if (hi < 0) continue;
                pairs_.push_back({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(hi)});
            }
            offsets_[static_cast<std::size_t>(i + 1)] = pairs_.size();
        }
    }

    /// Advances `state` by `steps` steps of size dt.
    void advance(std::vector<cplx>& state, double dt_us, long steps) {
        prepare(dt_us);
        for (long s = 0; s < steps; ++s) {
            drive_half(state);
            apply_phases(state);
            drive_half(state);
        }
    }

    const SpinModel& model() const { return model_; }
    const TruncatedBasis& basis() const { return basis_; }

private:
    struct Pair {
        std::uint32_t lo;
        std::uint32_t hi;
    };

    void prepare(double dt) {
        if (dt == prepared_dt_) return;
        prepared_dt_ = dt;
        phases_.resize(energies_.size());
        for (std::size_t k = 0; k < energies_.size(); ++k)
            phases_[k] = std::polar(1.0, -2.0 * constants::pi * energies_[k] * dt);
        // each half-step drive is split into a forward and a backward sweep of dt/4
        const double angle = 2.0 * constants::pi * model_.omega_mhz / 2.0 * (dt / 4.0);
        cos_ = std::cos(angle);
        sin_ = std::sin(angle);
    }

    template <class Fn>
    void chunked(std::size_t count, Fn&& fn) {
        constexpr std::size_t chunk = 1 << 14;
        const std::size_t chunks = (count + chunk - 1) / chunk;
        if (chunks <= 1 || budget_.resolved() <= 1) {
            fn(std::size_t{0}, count);
            return;
        }
        parallel_for(chunks, budget_, [&](std::size_t c) { fn(c * chunk, std::min(count, (c + 1) * chunk)); });
    }

    void rotate_site(std::vector<cplx>& state, int site) {
        const std::size_t begin = offsets_[static_cast<std::size_t>(site)];
        const std::size_t end = offsets_[static_cast<std::size_t>(site + 1)];
        const double c = cos_, s = sin_;
        // [a, b] -> [c a - i s b, -i s a + c b], spelled out in real arithmetic
        // to keep the complex multiply's inf/nan handling out of the loop
        chunked(end - begin, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = begin + lo; p < begin + hi; ++p) {
                cplx& a = state[pairs_[p].lo];
                cplx& b = state[pairs_[p].hi];
                const double ar = a.real(), ai = a.imag(), br = b.real(), bi = b.imag();
                a = {c * ar + s * bi, c * ai - s * br};
                b = {c * br + s * ai, c * bi - s * ar};
            }
        });
    }

    void drive_half(std::vector<cplx>& state) {
        if (model_.omega_mhz == 0.0) return;
        const int n = model_.atoms();
        for (int i = 0; i < n; ++i) rotate_site(state, i);
        for (int i = n - 1; i >= 0; --i) rotate_site(state, i);
    }

    void apply_phases(std::vector<cplx>& state) {
        chunked(state.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t k = lo; k < hi; ++k) {
                const cplx a = state[k], f = phases_[k];
                state[k] = {a.real() * f.real() - a.imag() * f.imag(), a.real() * f.imag() + a.imag() * f.real()};
            }
        });
    }

    SpinModel model_;
    const TruncatedBasis& basis_;
    Parallelism budget_;
    std::vector<double> energies_;
    std::vector<Pair> pairs_;
    std::vector<std::size_t> offsets_;
    std::vector<cplx> phases_;
    double prepared_dt_ = -1.0;
    double cos_ = 1.0, sin_ = 0.0;
};

inline double state_norm(const std::vector<cplx>& s) {
    double n = 0.0;
    for (const auto& a : s) n += std::norm(a);
    return n;
}

/// Quench from the all-ground configuration, recording observables at the
/// requested times (ascending, within [0, t_final]). The step is shortened
/// where needed so that every record time is hit exactly.
inline QuenchTrajectory evolve_spin_model(const SpinModel& model, const TruncatedBasis& basis, double t_final_us,
                                          std::vector<double> record_times_us, const EvolutionOptions& opt = {}) {
    if (!(t_final_us >= 0)) throw ConfigError("t_final must be >= 0");
    for (double t : record_times_us) {
        if (t < 0 || t > t_final_us * (1 + 1e-12)) {
            std::ostringstream os;
            os << "record time " << t << " us lies outside [0, t_final=" << t_final_us << " us]";
            throw ConfigError(os.str());
        }
    }
    if (!std::is_sorted(record_times_us.begin(), record_times_us.end()))
        throw ConfigError("record times must be ascending");
    const auto ground = basis.index_of(0);
    if (ground < 0) throw ConfigError("truncated basis lacks the all-ground configuration");

    SplitStepPropagator prop(model, basis, opt.budget);
    const double dt_max = opt.dt_us > 0 ? opt.dt_us : default_time_step_us(model, basis);
    std::vector<cplx> state(basis.size(), cplx{0.0, 0.0});
    state[static_cast<std::size_t>(ground)] = 1.0;

    QuenchTrajectory traj;
    double now = 0.0;
    for (double t : record_times_us) {
        const double span = t - now;
        if (span > 0) {
            const long steps = std::max(1L, static_cast<long>(std::ceil(span / dt_max - 1e-9)));
            prop.advance(state, span / static_cast<double>(steps), steps);
            now = t;
        }
        const double err = std::abs(state_norm(state) - 1.0);
        if (err > opt.norm_tolerance) {
            std::ostringstream os;
            os << "norm drift " << err << " at t=" << t << " us exceeds " << opt.norm_tolerance << "; reduce dt";
            throw NumericalError(os.str());
        }
        traj.times_us.push_back(t);
        traj.pulse_areas.push_back(2.0 * constants::pi * model.omega_mhz * t);
        traj.points.push_back(observables(state, basis));
        traj.norm_errors.push_back(err);
        if (opt.store_states) traj.states.push_back(state);
    }
    return traj;
}

}  // namespace rydmap
