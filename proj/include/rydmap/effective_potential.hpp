#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydmap/errors.hpp"
#include "rydmap/pair_interaction.hpp"
#include "rydmap/parallel.hpp"

namespace rydmap {

struct CurveSample {
    double r_um = 0.0;
    double energy_mhz = 0.0;  // eigenvalue, relative to the zero-field target pair energy
    double u_mhz = 0.0;       // interaction shift: energy minus the field-shifted non-interacting pair energy
    double overlap = 0.0;
    bool ambiguous = false;   // overlap fell below the tracking floor
};

struct EffectiveCurve {
    double theta_rad = 0.0;
    FieldConfig fields;
    double reference_mhz = 0.0;
    std::vector<CurveSample> samples;  // ascending R
    std::vector<std::string> warnings;
};

struct TrackingOptions {
    double overlap_floor = 0.5;     // samples below are flagged ambiguous
    double candidate_share = 0.5;   // continuity is only considered among states with overlap >= share * max
};

namespace detail {

/// Among the states whose |rr> overlap is at least `share` times the
/// largest overlap, picks the one most similar to the previous eigenvector.
/// The restriction keeps the curve on states that carry the target character
/// through sharp avoided crossings.
inline Eigen::Index continue_curve(const Eigen::MatrixXd& vectors, const Eigen::VectorXd& overlaps,
                                   const Eigen::VectorXd& previous, double share) {
    const Eigen::VectorXd proj = (vectors.transpose() * previous).cwiseAbs();
    const double floor = share * overlaps.maxCoeff();
    Eigen::Index best = -1;
    for (Eigen::Index k = 0; k < proj.size(); ++k) {
        if (overlaps(k) < floor) continue;
        if (best < 0 || proj(k) > proj(best)) best = k;
    }
    return best;
}

inline void finish_curve(EffectiveCurve& curve, const TrackingOptions& opt) {
    std::reverse(curve.samples.begin(), curve.samples.end());
    for (auto& s : curve.samples) {
        if (s.overlap < opt.overlap_floor) {
            s.ambiguous = true;
            std::ostringstream os;
            os << "tracked curve overlap " << s.overlap << " below floor " << opt.overlap_floor << " at R=" << s.r_um
               << " um";
            curve.warnings.push_back(os.str());
        }
    }
}

}  // namespace detail

/// Follows the eigenstate with dominant |rr> overlap from the largest R
/// inward, choosing at each step the eigenvector with the largest overlap
/// with the previous one among the states that still carry a comparable
/// share of |rr>. Spectra without stored vectors fall back to the
/// maximal-overlap state at every point.
inline EffectiveCurve track_dominant_curve(const std::vector<PairSpectrumPoint>& spectrum, double theta_rad,
                                           const FieldConfig& fields, const TrackingOptions& opt = {}) {
    if (spectrum.empty()) throw ConfigError("cannot track a curve through an empty spectrum");
    EffectiveCurve curve;
    curve.theta_rad = theta_rad;
    curve.fields = fields;
    curve.reference_mhz = spectrum.back().reference_mhz;
    Eigen::VectorXd previous;
    bool fallback = false;
    for (auto it = spectrum.rbegin(); it != spectrum.rend(); ++it) {
        const auto& p = *it;
        Eigen::Index k;
        if (previous.size() == 0 || !p.has_vectors()) {
            k = p.dominant();
            if (previous.size() != 0) fallback = true;
        } else {
            k = detail::continue_curve(p.vectors, p.overlaps, previous, opt.candidate_share);
        }
        if (p.has_vectors()) previous = p.vectors.col(k);
        curve.samples.push_back({p.r_um, p.energies_mhz(k), p.detuning(k), p.overlaps(k), false});
    }
    if (fallback) curve.warnings.push_back("eigenvectors missing; tracked by maximal overlap only");
    detail::finish_curve(curve, opt);
    return curve;
}

/// Streaming variant: diagonalises from the largest R inward and keeps only
/// the previous eigenvector, so memory stays at one decomposition.
inline EffectiveCurve track_dominant_curve(const PairHamiltonian& h, std::vector<double> r_list,
                                           const TrackingOptions& opt = {}) {
    if (r_list.empty()) throw ConfigError("cannot track a curve over an empty R list");
    std::sort(r_list.begin(), r_list.end());
    EffectiveCurve curve;
    curve.theta_rad = h.theta();
    curve.fields = h.fields();
    curve.reference_mhz = h.reference_mhz();
    Eigen::VectorXd previous;
    for (auto it = r_list.rbegin(); it != r_list.rend(); ++it) {
        const auto p = diagonalize_at(h, *it, true);
        const Eigen::Index k =
            previous.size() == 0 ? p.dominant() : detail::continue_curve(p.vectors, p.overlaps, previous, opt.candidate_share);
        previous = p.vectors.col(k);
        curve.samples.push_back({p.r_um, p.energies_mhz(k), p.detuning(k), p.overlaps(k), false});
    }
    detail::finish_curve(curve, opt);
    return curve;
}

struct C6Fit {
    double theta_rad = 0.0;
    double c6_mhz_um6 = 0.0;
    double r_min_um = 0.0;
    double max_relative_residual = 0.0;
    std::size_t n_samples = 0;
};

/// Unweighted least squares of U = C6 x with x = 1/R^6 over samples with R >= r_min.
inline C6Fit fit_c6(const EffectiveCurve& curve, double r_min_um) {
    double sxx = 0.0, sxu = 0.0;
    std::size_t count = 0;
    for (const auto& s : curve.samples) {
        if (s.r_um < r_min_um) continue;
        const double x = std::pow(s.r_um, -6.0);
        sxx += x * x;
        sxu += x * s.u_mhz;
        ++count;
    }
    if (count < 5) {
        std::ostringstream os;
        os << "C6 fit needs at least 5 samples with R >= " << r_min_um << " um, got " << count;
        throw ConfigError(os.str());
    }
    C6Fit fit;
    fit.theta_rad = curve.theta_rad;
    fit.r_min_um = r_min_um;
    fit.n_samples = count;
    fit.c6_mhz_um6 = sxu / sxx;
    for (const auto& s : curve.samples) {
        if (s.r_um < r_min_um) continue;
        const double model = fit.c6_mhz_um6 * std::pow(s.r_um, -6.0);
        const double rel = s.u_mhz == 0.0 ? std::abs(model) : std::abs(s.u_mhz - model) / std::abs(s.u_mhz);
        fit.max_relative_residual = std::max(fit.max_relative_residual, rel);
    }
    return fit;
}

/// Sampling grid of tracked curves and the C6 fit window.
struct CurveSettings {
    double r_min_um = 6.0;
    double r_max_um = 20.0;
    double r_step_um = 0.25;
    double fit_r_min_um = 8.0;
    int max_multipole = 2;
    TrackingOptions tracking;

    std::vector<double> grid() const { return linear_grid(r_min_um, r_max_um, r_step_um); }
};

/// Angle folded into [0, pi/2]: swapping the two identical atoms maps theta to pi - theta.
inline double fold_theta(double theta_rad) {
    double t = std::fmod(std::abs(theta_rad), 2.0 * constants::pi);
    if (t > constants::pi) t = 2.0 * constants::pi - t;
    return t > constants::pi / 2 ? constants::pi - t : t;
}

struct C6ProfileEntry {
    double theta_rad = 0.0;
    C6Fit fit;
    double u_at_eval_mhz = 0.0;  // tracked U at the evaluation distance (C6/R^6 outside the grid)
    double c6_over_r6_at_eval_mhz = 0.0;
    std::vector<std::string> warnings;
    std::string error;  // non-empty when this angle failed
};

/// Tracked curve of one angle on the settings grid.
inline EffectiveCurve effective_curve(const PairBasis& basis, const AtomicStructure& atom, const FieldConfig& fields,
                                      double theta_rad, const CurveSettings& settings) {
    const PairHamiltonian h(basis, atom, fields, theta_rad, settings.max_multipole);
    return track_dominant_curve(h, settings.grid(), settings.tracking);
}

/// U at R by interpolating U R^6 linearly between curve samples, C6/R^6 outside.
inline double evaluate_curve(const EffectiveCurve& curve, const C6Fit& fit, double r_um) {
    const auto& s = curve.samples;
    if (s.empty() || r_um < s.front().r_um || r_um > s.back().r_um) return fit.c6_mhz_um6 / std::pow(r_um, 6.0);
    auto hi = std::lower_bound(s.begin(), s.end(), r_um, [](const CurveSample& c, double r) { return c.r_um < r; });
    if (hi->r_um == r_um) return hi->u_mhz;
    const auto lo = hi - 1;
    const double w = (r_um - lo->r_um) / (hi->r_um - lo->r_um);
    const double a = lo->u_mhz * std::pow(lo->r_um, 6.0);
    const double b = hi->u_mhz * std::pow(hi->r_um, 6.0);
    return ((1.0 - w) * a + w * b) / std::pow(r_um, 6.0);
}

/// Spectrum, tracking and fit for each angle. Failures are recorded per angle.
inline std::vector<C6ProfileEntry> c6_angular_profile(const PairBasis& basis, const AtomicStructure& atom,
                                                      const FieldConfig& fields, const std::vector<double>& thetas,
                                                      double r_eval_um, const CurveSettings& settings = {},
                                                      Parallelism budget = {}) {
    std::vector<C6ProfileEntry> out(thetas.size());
    parallel_for(thetas.size(), budget, [&](std::size_t i) {
        auto& e = out[i];
        e.theta_rad = thetas[i];
        try {
            const auto curve = effective_curve(basis, atom, fields, thetas[i], settings);
            e.fit = fit_c6(curve, settings.fit_r_min_um);
            e.u_at_eval_mhz = evaluate_curve(curve, e.fit, r_eval_um);
            e.c6_over_r6_at_eval_mhz = e.fit.c6_mhz_um6 / std::pow(r_eval_um, 6.0);
            e.warnings = curve.warnings;
        } catch (const Error& err) {
            e.error = err.what();
        }
    });
    return out;
}

/// U(R, theta) for a fixed target and field configuration, built lazily one
/// folded angle at a time and cached. Safe to query from several threads.
class EffectivePotential {
public:
    EffectivePotential(std::shared_ptr<const PairBasis> basis, std::shared_ptr<const AtomicStructure> atom,
                       FieldConfig fields, CurveSettings settings = {})
        : basis_(std::move(basis)), atom_(std::move(atom)), fields_(fields), settings_(settings) {}

    /// Computes the curves of all listed angles up front, in parallel.
    void prepare(const std::vector<double>& thetas, Parallelism budget = {}) {
        std::vector<long> keys;
        for (double t : thetas) keys.push_back(key(t));
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        parallel_for(keys.size(), budget, [&](std::size_t i) { entry(keys[i]); });
    }

    double operator()(double r_um, double theta_rad) const {
        const auto& e = entry(key(theta_rad));
        return evaluate_curve(e.curve, e.fit, r_um);
    }

    const EffectiveCurve& curve(double theta_rad) const { return entry(key(theta_rad)).curve; }
    const C6Fit& fit(double theta_rad) const { return entry(key(theta_rad)).fit; }
    const FieldConfig& fields() const { return fields_; }
    const CurveSettings& settings() const { return settings_; }
    std::size_t cached_angles() const {
        std::lock_guard lock(mutex_);
        return cache_.size();
    }

private:
    struct Entry {
        EffectiveCurve curve;
        C6Fit fit;
    };

    // angles are cached on a 1e-9 rad lattice after folding
    static long key(double theta_rad) { return std::lround(fold_theta(theta_rad) * 1e9); }

    const Entry& entry(long k) const {
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(k); it != cache_.end()) return *it->second;
        }
        auto e = std::make_shared<Entry>();
        e->curve = effective_curve(*basis_, *atom_, fields_, static_cast<double>(k) * 1e-9, settings_);
        e->fit = fit_c6(e->curve, settings_.fit_r_min_um);
        std::lock_guard lock(mutex_);
        return *cache_.try_emplace(k, std::move(e)).first->second;
    }

    std::shared_ptr<const PairBasis> basis_;
    std::shared_ptr<const AtomicStructure> atom_;
    FieldConfig fields_;
    CurveSettings settings_;
    mutable std::mutex mutex_;
    mutable std::map<long, std::shared_ptr<const Entry>> cache_;
};

}  // namespace rydmap
