#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "rydmap/effective_potential.hpp"
#include "rydmap/run.hpp"

using namespace rydmap;

namespace {

const AtomicStructure& rb() {
    static const AtomicStructure a(DefectTable::load(resolve_data_file("rb87_quantum_defects.json").string()));
    return a;
}

const AtomicState target = AtomicState::make(61, 2, 1.5, 1.5);

// Second-order dipole-dipole shift of |rr> on the interatomic axis, summed
// directly over single-atom pairs inside the same n, l and energy windows
// as the default basis. The target sublevel is alone in its total-M block
// at zero field, so the non-degenerate formula applies.
double perturbative_c6_on_axis(const AtomicState& r, int n_window, int l_max, double window_mhz) {
    std::vector<AtomicState> singles;
    for (int n = r.n - n_window; n <= r.n + n_window; ++n)
        for (int l = 0; l <= std::min(l_max, n - 1); ++l)
            for (int j2 : {2 * l - 1, 2 * l + 1}) {
                if (j2 < 1) continue;
                for (int m2 = -j2; m2 <= j2; m2 += 2) singles.push_back(AtomicState::make(n, l, j2 / 2.0, m2 / 2.0));
            }
    const double er = rb().energy_mhz(r);
    const double conv = constants::hartree_mhz * std::pow(constants::bohr_um, 3);
    double c6 = 0.0;
    for (const auto& a : singles) {
        for (const auto& b : singles) {
            const double de = 2.0 * er - rb().energy_mhz(a) - rb().energy_mhz(b);
            if (std::abs(de) > window_mhz || std::abs(de) < 1e-6) continue;
            // d1.d2 - 3 d1z d2z = -(d1+ d2- + d1- d2+ + 2 d1z d2z)
            double v = 0.0;
            for (int q : {-1, 0, 1})
                v -= (q == 0 ? 2.0 : 1.0) * rb().multipole_element(a, 1, q, r) * rb().multipole_element(b, 1, -q, r);
            v *= conv;
            c6 += v * v / de;
        }
    }
    return c6;
}

// two-level pair spectrum: |rr> with C/R^6 crossing a flat state at delta,
// coupled by g
std::vector<PairSpectrumPoint> two_level_spectrum(double c, double delta, double g, const std::vector<double>& rs,
                                                  bool vectors) {
    std::vector<PairSpectrumPoint> out;
    for (double r : rs) {
        Eigen::Matrix2d h;
        h << c / std::pow(r, 6), g, g, delta;
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
        PairSpectrumPoint p;
        p.r_um = r;
        p.energies_mhz = es.eigenvalues();
        p.overlaps = es.eigenvectors().row(0).transpose().cwiseAbs2();
        if (vectors) p.vectors = es.eigenvectors();
        out.push_back(std::move(p));
    }
    return out;
}

EffectiveCurve synthetic_curve(double c6, double lo, double hi, double step) {
    EffectiveCurve c;
    for (double r : linear_grid(lo, hi, step)) c.samples.push_back({r, c6 / std::pow(r, 6), c6 / std::pow(r, 6), 1.0, false});
    return c;
}

}  // namespace

TEST(C6, OnAxisMatchesSecondOrderPerturbation) {
    const auto basis = build_pair_basis({target, target}, BasisCutoffs{}, rb());
    CurveSettings cs;
    cs.max_multipole = 1;
    cs.r_min_um = 12.0;
    cs.r_max_um = 20.0;
    cs.r_step_um = 0.5;
    const auto curve = effective_curve(basis, rb(), FieldConfig{}, 0.0, cs);
    const auto fit = fit_c6(curve, 12.0);
    const double oracle = perturbative_c6_on_axis(target, 2, 4, 2000.0);
    EXPECT_LT(oracle, 0.0);
    EXPECT_NEAR(fit.c6_mhz_um6 / oracle, 1.0, 0.01);
}

TEST(C6, ReflectedAngleGivesSameCoefficient) {
    const auto basis = build_pair_basis({target, target}, BasisCutoffs{1000.0, 2, 3, 2, -1}, rb());
    CurveSettings cs;
    cs.r_min_um = 8.0;
    cs.r_max_um = 16.0;
    cs.r_step_um = 1.0;
    const double theta = 0.6;
    const auto a = fit_c6(effective_curve(basis, rb(), FieldConfig{3.5, 0.0}, theta, cs), 8.0);
    const auto b = fit_c6(effective_curve(basis, rb(), FieldConfig{3.5, 0.0}, constants::pi - theta, cs), 8.0);
    EXPECT_NEAR(a.c6_mhz_um6 / b.c6_mhz_um6, 1.0, 1e-6);
}

TEST(C6, FitRecoversExactCoefficient) {
    const auto c = synthetic_curve(-2.5e5, 6.0, 20.0, 0.5);
    const auto fit = fit_c6(c, 8.0);
    EXPECT_NEAR(fit.c6_mhz_um6, -2.5e5, 1e-6);
    EXPECT_LT(fit.max_relative_residual, 1e-12);
    EXPECT_EQ(fit.n_samples, 25u);
    EXPECT_THROW(fit_c6(c, 19.0), ConfigError);
}

TEST(Curve, EvaluationInterpolatesAndExtrapolates) {
    const auto c = synthetic_curve(-1e5, 6.0, 20.0, 1.0);
    const auto fit = fit_c6(c, 8.0);
    for (double r : {6.0, 7.3, 12.5, 20.0, 25.0, 40.0}) EXPECT_NEAR(evaluate_curve(c, fit, r) * std::pow(r, 6), -1e5, 1e-6);
}

TEST(Curve, FoldTheta) {
    const double pi = constants::pi;
    EXPECT_DOUBLE_EQ(fold_theta(0.3), 0.3);
    EXPECT_NEAR(fold_theta(pi - 0.3), 0.3, 1e-15);
    EXPECT_NEAR(fold_theta(-0.3), 0.3, 1e-15);
    EXPECT_NEAR(fold_theta(pi + 0.3), 0.3, 1e-14);
    EXPECT_NEAR(fold_theta(pi / 2), pi / 2, 1e-15);
}

TEST(Tracking, FollowsTargetCharacterThroughSharpCrossing) {
    // |rr> at -1e5/R^6 crosses a level at -1 MHz near R = 6.8 um
    std::vector<double> rs = linear_grid(6.0, 10.0, 0.1);
    const auto spectrum = two_level_spectrum(-1e5, -1.0, 0.002, rs, true);
    const auto curve = track_dominant_curve(spectrum, 1.0, FieldConfig{});
    ASSERT_EQ(curve.samples.size(), rs.size());
    for (const auto& s : curve.samples) {
        if (std::abs(s.r_um - 6.8) < 0.15) continue;
        EXPECT_NEAR(s.u_mhz, -1e5 / std::pow(s.r_um, 6), 1e-3) << s.r_um;
        EXPECT_GT(s.overlap, 0.9);
    }
}

TEST(Tracking, ContinuityPicksAdiabaticBranchAmongComparableStates) {
    // broad crossing: coming in from large R the tracker stays on the upper
    // (adiabatic) branch while it still holds at least half the |rr> share of
    // the other state, then hands over for good
    std::vector<double> rs = linear_grid(6.0, 10.0, 0.1);
    const auto spectrum = two_level_spectrum(-1e5, -1.0, 0.4, rs, true);
    const auto curve = track_dominant_curve(spectrum, 1.0, FieldConfig{});
    bool handed_over = false;
    int upper_count = 0;
    for (std::size_t i = rs.size(); i-- > 0;) {
        const auto& ov = spectrum[i].overlaps;
        if (ov(1) < 0.5 * ov(0)) handed_over = true;
        const Eigen::Index expected = handed_over ? 0 : 1;
        upper_count += !handed_over;
        EXPECT_NEAR(curve.samples[i].energy_mhz, spectrum[i].energies_mhz(expected), 1e-12) << rs[i];
    }
    EXPECT_TRUE(handed_over);
    // continuity keeps the upper branch past the point where it stops being dominant
    int dominant_upper = 0;
    for (const auto& p : spectrum) dominant_upper += p.dominant() == 1;
    EXPECT_GT(upper_count, dominant_upper);
    bool flagged = false;
    for (const auto& s : curve.samples) flagged |= s.ambiguous;
    EXPECT_TRUE(flagged);
    EXPECT_FALSE(curve.warnings.empty());
}

TEST(Tracking, WithoutVectorsFallsBackToMaximalOverlap) {
    const auto spectrum = two_level_spectrum(-1e5, -1.0, 0.4, linear_grid(6.0, 10.0, 0.5), false);
    const auto curve = track_dominant_curve(spectrum, 1.0, FieldConfig{});
    for (std::size_t i = 0; i < spectrum.size(); ++i)
        EXPECT_EQ(curve.samples[i].energy_mhz, spectrum[i].energies_mhz(spectrum[i].dominant()));
    EXPECT_THROW(track_dominant_curve(std::vector<PairSpectrumPoint>{}, 0.0, FieldConfig{}), ConfigError);
}

TEST(EffectivePotentialCache, ReflectedAnglesShareOneCurve) {
    auto basis = std::make_shared<const PairBasis>(
        build_pair_basis({target, target}, BasisCutoffs{600.0, 1, 3, 1, -1}, rb()));
    auto atom = std::shared_ptr<const AtomicStructure>(&rb(), [](const AtomicStructure*) {});
    CurveSettings cs;
    cs.r_min_um = 8.0;
    cs.r_max_um = 14.0;
    cs.r_step_um = 1.0;
    EffectivePotential u(basis, atom, FieldConfig{3.5, 0.0}, cs);
    u.prepare({0.4, constants::pi - 0.4, -0.4}, Parallelism{2});
    EXPECT_EQ(u.cached_angles(), 1u);
    EXPECT_DOUBLE_EQ(u(9.0, 0.4), u(9.0, constants::pi - 0.4));
    EXPECT_LT(u(9.0, 0.4), 0.0);
    // beyond the grid the asymptotic form takes over
    EXPECT_NEAR(u(30.0, 0.4), u.fit(0.4).c6_mhz_um6 / std::pow(30.0, 6), 1e-15);
}
