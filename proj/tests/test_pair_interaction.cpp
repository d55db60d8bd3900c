#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <set>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "rydmap/pair_interaction.hpp"
#include "rydmap/run.hpp"

using namespace rydmap;
using cd = std::complex<double>;

namespace {

const AtomicStructure& rb() {
    static const AtomicStructure a(DefectTable::load(resolve_data_file("rb87_quantum_defects.json").string()));
    return a;
}

const AtomicState target = AtomicState::make(61, 2, 1.5, 1.5);

const PairBasis& small_basis() {
    static const PairBasis b = build_pair_basis({target, target}, BasisCutoffs{1000.0, 2, 3, 1, -1}, rb());
    return b;
}

const PairBasis& default_basis() {
    static const PairBasis b = build_pair_basis({target, target}, BasisCutoffs{}, rb());
    return b;
}

// Cartesian components of <a|d|c> in atomic units from the spherical ones.
std::array<cd, 3> dipole_vector(const AtomicState& a, const AtomicState& c) {
    const double dm = rb().multipole_element(a, 1, -1, c);
    const double d0 = rb().multipole_element(a, 1, 0, c);
    const double dp = rb().multipole_element(a, 1, 1, c);
    return {(dm - dp) / std::sqrt(2.0), cd(0, 1) * (dm + dp) / std::sqrt(2.0), cd(d0, 0)};
}

// (d1.d2 - 3 (d1.n)(d2.n)) / R^3 in MHz over the full product basis.
Eigen::MatrixXcd cartesian_dipole_dipole(const PairBasis& basis, double r_um, const std::array<double, 3>& axis) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXcd v(n, n);
    const double conv = constants::hartree_mhz * std::pow(constants::bohr_um, 3) / std::pow(r_um, 3);
    for (Eigen::Index x = 0; x < n; ++x) {
        for (Eigen::Index y = 0; y < n; ++y) {
            const auto p = basis.state(static_cast<std::size_t>(x));
            const auto q = basis.state(static_cast<std::size_t>(y));
            const auto d1 = dipole_vector(p.a, q.a);
            const auto d2 = dipole_vector(p.b, q.b);
            cd dot = 0, n1 = 0, n2 = 0;
            for (int i = 0; i < 3; ++i) {
                dot += d1[i] * d2[i];
                n1 += d1[i] * axis[i];
                n2 += d2[i] * axis[i];
            }
            v(x, y) = (dot - 3.0 * n1 * n2) * conv;
        }
    }
    return v;
}

int total_m2(const PairBasis& b, std::size_t i) {
    const auto p = b.state(i);
    return p.a.mj2 + p.b.mj2;
}

}  // namespace

TEST(PairBasis, ContainsTargetAndIsExchangeClosed) {
    const auto& b = default_basis();
    ASSERT_LT(b.target_index, b.size());
    EXPECT_EQ(b.state(b.target_index).a, target);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto [x, y] = b.states[i];
        EXPECT_TRUE(b.find(y, x).has_value());
        EXPECT_LE(std::abs(b.unperturbed_mhz[i]), 2000.0);
    }
}

TEST(PairBasis, DefaultSizeNearPaperScale) {
    const auto n = default_basis().size();
    EXPECT_GE(n, 400u);
    EXPECT_LE(n, 1600u);
}

TEST(PairBasis, VanishingWindowKeepsZeemanManifold) {
    const auto b = build_pair_basis({target, target}, BasisCutoffs{1e-6, 2, 4, 2, -1}, rb());
    EXPECT_EQ(b.size(), 16u);  // (2j+1)^2 sublevels of 61D3/2 + 61D3/2
    for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_EQ(b.state(i).a.n, 61);
        EXPECT_EQ(b.state(i).a.l, 2);
        EXPECT_EQ(b.state(i).a.j2, 3);
    }
}

TEST(PairBasis, WindowsExcludingTargetRejected) {
    EXPECT_THROW(build_pair_basis({target, target}, BasisCutoffs{2000.0, 2, 1, 2, -1}, rb()), ConfigError);
    EXPECT_THROW(build_pair_basis({target, target}, BasisCutoffs{-1.0, 2, 4, 2, -1}, rb()), ConfigError);
}

TEST(Interaction, MatchesCartesianDipoleDipole) {
    const auto& b = small_basis();
    const double theta = 1.2, r = 7.0;
    const Eigen::MatrixXd v = interaction_hamiltonian(b, Geometry{r, theta}, 1, rb());
    const auto oracle = cartesian_dipole_dipole(b, r, {std::sin(theta), 0.0, std::cos(theta)});
    const double scale = oracle.cwiseAbs().maxCoeff();
    ASSERT_GT(scale, 1.0);
    EXPECT_LT((oracle - v.cast<cd>()).cwiseAbs().maxCoeff(), 1e-10 * scale);
}

TEST(Interaction, AzimuthalRotationLeavesSpectrumUnchanged) {
    const auto& b = small_basis();
    const double theta = 1.0, r = 7.0, phi = 0.9;
    const PairHamiltonian h(b, rb(), FieldConfig{3.5, 10.0}, theta, 1, SectorMode::full);
    const Eigen::VectorXd ours = linalg::eigh(h.matrix(r), false).values;
    const Eigen::MatrixXcd rotated =
        h.field_part().cast<cd>() +
        cartesian_dipole_dipole(b, r, {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)});
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rotated, Eigen::EigenvaluesOnly);
    const double scale = ours.cwiseAbs().maxCoeff();
    EXPECT_LT((ours - es.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10 * scale);
}

TEST(Interaction, DipoleScalesAsInverseCube) {
    const auto& b = small_basis();
    const Eigen::MatrixXd v1 = interaction_hamiltonian(b, Geometry{6.0, 0.5}, 1, rb());
    const Eigen::MatrixXd v2 = interaction_hamiltonian(b, Geometry{12.0, 0.5}, 1, rb());
    EXPECT_LT((v1 / 8.0 - v2).cwiseAbs().maxCoeff(), 1e-14 * v1.cwiseAbs().maxCoeff());
}

TEST(Interaction, HermitianAndBlockDiagonalOnAxis) {
    const auto& b = small_basis();
    const Eigen::MatrixXd v = interaction_hamiltonian(b, Geometry{6.5, 0.0}, 2, rb());
    const double scale = v.cwiseAbs().maxCoeff();
    EXPECT_LT((v - v.transpose()).cwiseAbs().maxCoeff(), 1e-12 * scale);
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            if (total_m2(b, i) != total_m2(b, j)) {
                ASSERT_EQ(v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 0.0);
            }
    const Eigen::MatrixXd tilted = interaction_hamiltonian(b, Geometry{6.5, 1.0}, 2, rb());
    EXPECT_LT((tilted - tilted.transpose()).cwiseAbs().maxCoeff(), 1e-12 * scale);
}

TEST(Interaction, ReflectionThroughTransversePlane) {
    // reflecting z -> -z is parity times a rotation by pi about z: it maps the
    // axis at theta to pi - theta, keeps B_z and flips E_z, and acts on a pair
    // state as the sign (-1)^(l_a + l_b + M)
    const auto& b = small_basis();
    const double theta = 0.6;
    const PairHamiltonian h1(b, rb(), FieldConfig{6.9, 0.0}, theta, 2, SectorMode::full);
    const PairHamiltonian h2(b, rb(), FieldConfig{6.9, 0.0}, constants::pi - theta, 2, SectorMode::full);
    const auto n = static_cast<Eigen::Index>(b.size());
    Eigen::VectorXd sign(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = b.state(static_cast<std::size_t>(i));
        sign(i) = ((p.a.l + p.b.l + total_m2(b, static_cast<std::size_t>(i)) / 2) % 2 == 0) ? 1.0 : -1.0;
    }
    const Eigen::MatrixXd m1 = h1.matrix(6.5);
    const Eigen::MatrixXd mapped = sign.asDiagonal() * m1 * sign.asDiagonal();
    EXPECT_LT((mapped - h2.matrix(6.5)).cwiseAbs().maxCoeff(), 1e-10 * m1.cwiseAbs().maxCoeff());

    const auto e1 = linalg::eigh(h1.matrix(6.5), false).values;
    const auto e2 = linalg::eigh(h2.matrix(6.5), false).values;
    EXPECT_LT((e1 - e2).cwiseAbs().maxCoeff(), 1e-8 * e1.cwiseAbs().maxCoeff());
}

TEST(Interaction, BelowValidityRangeRejected) {
    const PairHamiltonian h(small_basis(), rb(), FieldConfig{}, 0.0, 1);
    EXPECT_GT(h.min_distance_um(), 0.5);
    EXPECT_THROW(h.matrix(0.5 * h.min_distance_um()), ConfigError);
    EXPECT_THROW(diagonalize_at(h, 0.1, false), ConfigError);
}

TEST(Sector, SymmetricSectorSpectrumIsSubsetOfFull) {
    const auto& b = small_basis();
    const PairHamiltonian full(b, rb(), FieldConfig{3.5, 0.0}, 1.36, 2, SectorMode::full);
    const PairHamiltonian sym(b, rb(), FieldConfig{3.5, 0.0}, 1.36, 2, SectorMode::symmetric);
    ASSERT_LT(sym.dimension(), full.dimension());
    const auto ef = linalg::eigh(full.matrix(7.0), false).values;
    const auto es = linalg::eigh(sym.matrix(7.0), false).values;
    for (Eigen::Index k = 0; k < es.size(); ++k) EXPECT_LT((ef.array() - es(k)).abs().minCoeff(), 1e-8);
    // the target curve lives in the symmetric sector
    const auto pf = diagonalize_at(full, 7.0, false);
    const auto ps = diagonalize_at(sym, 7.0, false);
    EXPECT_NEAR(pf.energies_mhz(pf.dominant()), ps.energies_mhz(ps.dominant()), 1e-8);
    EXPECT_THROW(PairHamiltonian(b, rb(), FieldConfig{3.5, 5.0}, 1.36, 2, SectorMode::symmetric), ConfigError);
}

TEST(Spectrum, OverlapsSumToOneAndLargeRLimit) {
    const PairHamiltonian h(default_basis(), rb(), FieldConfig{3.5, 20.0}, 78.0 * constants::pi / 180.0, 2);
    const auto p = diagonalize_at(h, 20.0, false);
    EXPECT_NEAR(p.overlaps.sum(), 1.0, 1e-6);
    EXPECT_GT(p.overlaps(p.dominant()), 0.99);
    EXPECT_LT(std::abs(p.detuning(p.dominant())), 0.01);  // 10 kHz
    EXPECT_GE(p.overlaps.minCoeff(), 0.0);
}

TEST(Spectrum, WithFieldsReusesMultipoleParts) {
    const auto& b = small_basis();
    const PairHamiltonian a(b, rb(), FieldConfig{}, 1.0, 2, SectorMode::full);
    const PairHamiltonian direct(b, rb(), FieldConfig{6.9, 20.0}, 1.0, 2, SectorMode::full);
    const auto swapped = a.with_fields(b, rb(), FieldConfig{6.9, 20.0});
    EXPECT_EQ((swapped.matrix(7.0) - direct.matrix(7.0)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(swapped.reference_mhz(), direct.reference_mhz());
}

TEST(Spectrum, BasisGrowthStability) {
    const double theta = 78.0 * constants::pi / 180.0;
    const auto larger = build_pair_basis({target, target}, BasisCutoffs{3000.0, 2, 4, 2, -1}, rb());
    const auto e_default = [&] {
        const PairHamiltonian h(default_basis(), rb(), FieldConfig{3.5, 0.0}, theta, 2);
        const auto p = diagonalize_at(h, 9.0, false);
        return p.detuning(p.dominant());
    }();
    const PairHamiltonian h(larger, rb(), FieldConfig{3.5, 0.0}, theta, 2);
    const auto p = diagonalize_at(h, 9.0, false);
    EXPECT_LT(std::abs(p.detuning(p.dominant()) / e_default - 1.0), 0.01);
}

TEST(Resonances, NoneInTheFarTail) {
    const PairHamiltonian h(default_basis(), rb(), FieldConfig{3.5, 0.0}, 78.0 * constants::pi / 180.0, 2);
    const auto spectrum = pair_spectrum(h, linear_grid(30.0, 40.0, 2.0), true);
    const auto res = find_resonant_distances(spectrum, ResonanceOptions{});
    EXPECT_TRUE(res.resonances.empty());
}

TEST(Resonances, UnsortedGridRejected) {
    const PairHamiltonian h(small_basis(), rb(), FieldConfig{}, 0.0, 1);
    EXPECT_THROW(pair_spectrum(h, {8.0, 7.0}), ConfigError);
}
