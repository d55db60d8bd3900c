#include <cmath>

#include <gtest/gtest.h>

#include "rydmap/angular.hpp"
#include "rydmap/atomic_structure.hpp"
#include "rydmap/run.hpp"

using namespace rydmap;
using namespace rydmap::angular;

namespace {

const AtomicStructure& hydrogen() {
    static const AtomicStructure h(DefectTable::hydrogenic());
    return h;
}

const AtomicStructure& rubidium() {
    static const AtomicStructure rb(DefectTable::load(resolve_data_file("rb87_quantum_defects.json").string()));
    return rb;
}

// <r^2> of hydrogen, n^2 (5 n^2 + 1 - 3 l (l + 1)) / 2
double hydrogen_r2(int n, int l) { return n * n * (5.0 * n * n + 1.0 - 3.0 * l * (l + 1.0)) / 2.0; }

}  // namespace

TEST(Hydrogenic, EnergiesFollowRydbergFormula) {
    for (int n : {1, 5, 20, 61}) {
        for (int l : {0, n / 2, n - 1}) {
            const auto s = AtomicState::make(n, l, l + 0.5, 0.5);
            const double exact = -constants::rydberg_inf_ghz * 1e3 / (n * n);
            EXPECT_NEAR(hydrogen().energy_mhz(s) / exact, 1.0, 1e-10) << s.label();
        }
    }
}

TEST(Hydrogenic, NumerovExpectationValues) {
    for (int n : {1, 5, 20, 61}) {
        for (int l : {0, n / 2, n - 1}) {
            const auto s = AtomicState::make(n, l, l + 0.5, 0.5);
            const auto sol = hydrogen().radial(s);
            const double r1 = (3.0 * n * n - l * (l + 1.0)) / 2.0;
            EXPECT_NEAR(sol->expectation_r(1) / r1, 1.0, 1e-4) << s.label();
            EXPECT_NEAR(sol->expectation_r(2) / hydrogen_r2(n, l), 1.0, 1e-4) << s.label();
            // the inner grid cut may drop the innermost node of low-l states
            if (l > 0) {
                EXPECT_EQ(sol->n_nodes, n - l - 1) << s.label();
            }
        }
    }
}

TEST(Hydrogenic, RadialDipoleIntegrals) {
    // <2p|r|1s> = 128 sqrt(6) / 243 and <2p|r|2s> = 3 sqrt(3), up to the sign convention
    const auto s1 = AtomicState::make(1, 0, 0.5, 0.5);
    const auto s2 = AtomicState::make(2, 0, 0.5, 0.5);
    const auto p2 = AtomicState::make(2, 1, 0.5, 0.5);
    EXPECT_NEAR(std::abs(hydrogen().radial_element(s1, p2, 1)), 128.0 * std::sqrt(6.0) / 243.0, 1e-4);
    EXPECT_NEAR(std::abs(hydrogen().radial_element(s2, p2, 1)), 3.0 * std::sqrt(3.0), 1e-3);
}

TEST(Hydrogenic, RadialFunctionsOrthonormal) {
    const auto a = AtomicState::make(30, 2, 1.5, 0.5);
    const auto b = AtomicState::make(31, 2, 1.5, 0.5);
    EXPECT_NEAR(hydrogen().radial_element(a, a, 0), 1.0, 1e-8);
    EXPECT_NEAR(hydrogen().radial_element(a, b, 0), 0.0, 1e-6);
}

TEST(Angular, KnownSymbols) {
    // doubled arguments
    EXPECT_NEAR(wigner_3j(2, 2, 0, 0, 0, 0), -1.0 / std::sqrt(3.0), 1e-14);
    EXPECT_NEAR(wigner_3j(2, 2, 2, 2, -2, 0), 1.0 / std::sqrt(6.0), 1e-14);
    EXPECT_NEAR(wigner_6j(2, 2, 2, 2, 2, 2), 1.0 / 6.0, 1e-14);
    EXPECT_NEAR(wigner_6j(1, 1, 2, 1, 1, 2), 1.0 / 6.0, 1e-14);
    EXPECT_NEAR(clebsch_gordan(1, 1, 1, -1, 2, 0), 1.0 / std::sqrt(2.0), 1e-14);
    EXPECT_EQ(wigner_3j(2, 2, 6, 0, 0, 0), 0.0);  // triangle violated
    EXPECT_EQ(wigner_3j(2, 2, 2, 0, 0, 0), 0.0);  // odd sum with zero projections
}

TEST(Angular, ThreeJOrthogonality) {
    for (int j1 : {1, 2, 3, 4}) {
        for (int j2 : {1, 2, 5}) {
            for (int j3 = std::abs(j1 - j2); j3 <= j1 + j2; j3 += 2) {
                for (int m3 = -j3; m3 <= j3; m3 += 2) {
                    double s = 0.0;
                    for (int m1 = -j1; m1 <= j1; m1 += 2) {
                        const double w = wigner_3j(j1, j2, j3, m1, -m1 - m3, m3);
                        s += w * w;
                    }
                    EXPECT_NEAR((j3 + 1) * s, 1.0, 1e-12);
                }
            }
        }
    }
}

TEST(Angular, SphericalHarmonicsC) {
    const double t = 0.7;
    EXPECT_NEAR(spherical_c(1, 0, t), std::cos(t), 1e-14);
    EXPECT_NEAR(spherical_c(2, 0, t), 0.5 * (3 * std::cos(t) * std::cos(t) - 1), 1e-14);
    EXPECT_NEAR(std::abs(spherical_c(1, 1, t)), std::sin(t) / std::sqrt(2.0), 1e-14);
}

TEST(AtomicState, ValidationRejectsBadQuantumNumbers) {
    EXPECT_THROW(AtomicState::make(5, 5, 5.5, 0.5), ConfigError);
    EXPECT_THROW(AtomicState::make(5, 2, 3.5, 0.5), ConfigError);
    EXPECT_THROW(AtomicState::make(5, 2, 1.5, 2.5), ConfigError);
    EXPECT_THROW(AtomicState::make(5, 2, 1.5, 0.3), ConfigError);
    EXPECT_NO_THROW(AtomicState::make(61, 2, 1.5, 1.5));
}

TEST(Rubidium, RydbergRitzEnergy) {
    const auto s = AtomicState::make(61, 2, 1.5, 1.5);
    const double d0 = 1.34809171, d2 = -0.60286;
    const double x = 61 - d0;
    const double delta = d0 + d2 / (x * x);
    const double ry = constants::rydberg_inf_ghz * 1e3 / (1.0 + constants::electron_mass_u / constants::rb87_mass_u);
    EXPECT_NEAR(rubidium().energy_mhz(s) / (-ry / ((61 - delta) * (61 - delta))), 1.0, 1e-12);
}

TEST(Rubidium, UnknownDataFieldRejected) {
    nlohmann::json doc = {{"species", "X"}, {"mass_u", 87.0}, {"channels", nlohmann::json::array()}, {"bogus", 1}};
    EXPECT_THROW(DefectTable::from_json(doc), DataError);
    EXPECT_THROW(DefectTable::load("/nonexistent/defects.json"), DataError);
}

TEST(Zeeman, LandeFactors) {
    EXPECT_NEAR(lande_g(AtomicState::make(61, 2, 1.5, 1.5)), 0.8, 1e-14);
    EXPECT_NEAR(lande_g(AtomicState::make(61, 0, 0.5, 0.5)), 2.0, 1e-14);
    EXPECT_NEAR(lande_g(AtomicState::make(61, 1, 0.5, 0.5)), 2.0 / 3.0, 1e-14);
    // 61D3/2 m=3/2 at 3.5 G: 0.8 * 1.5 * 1.3996 * 3.5 MHz
    EXPECT_NEAR(zeeman_shift_mhz(AtomicState::make(61, 2, 1.5, 1.5), 3.5), 0.8 * 1.5 * constants::mu_b_mhz_per_gauss * 3.5,
                1e-12);
}

TEST(Stark, SingleAtomHamiltonianSymmetricAndConservesMj) {
    std::vector<AtomicState> b{AtomicState::make(61, 2, 1.5, 1.5), AtomicState::make(61, 3, 2.5, 1.5),
                               AtomicState::make(62, 2, 2.5, 1.5), AtomicState::make(61, 3, 2.5, 0.5)};
    const auto h = single_atom_hamiltonian(b, FieldConfig{3.5, 20.0}, rubidium());
    EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NE(h(1, 0), 0.0);
    EXPECT_EQ(h(3, 0), 0.0);  // different m_j
    EXPECT_EQ(h(2, 0), 0.0);  // needs Delta l = 1
}
