#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "rydmap/run.hpp"
#include "rydmap/two_atom_model.hpp"

using namespace rydmap;

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

std::vector<double> areas_to(double max_area, int n) {
    std::vector<double> a;
    for (int k = 0; k <= n; ++k) a.push_back(max_area * k / n);
    return a;
}

const double theta78 = 78.0 * constants::pi / 180.0;

}  // namespace

TEST(TwoAtomModel, IndependentAtomsFollowSinToTheFourth) {
    for (const FieldConfig f : {FieldConfig{3.5, 0.0}, FieldConfig{6.9, 20.0}}) {
        const TwoAtomFullModel model(small_basis(), rb(), f, Geometry{6.5, theta78}, 2, false);
        const auto areas = areas_to(8 * constants::pi, 64);
        const auto tr = model.evolve(1.2, times_for_pulse_areas(1.2, areas));
        for (std::size_t i = 0; i < areas.size(); ++i) {
            const double s2 = std::pow(std::sin(areas[i] / 2), 2);
            EXPECT_NEAR(tr.points[i].p_rr(), s2 * s2, 1e-6);
            EXPECT_NEAR(tr.points[i].f_r, s2, 1e-6);
            EXPECT_LT(tr.norm_errors[i], 1e-10);
        }
    }
}

TEST(TwoAtomModel, LayoutAndHermiticity) {
    const TwoAtomFullModel model(small_basis(), rb(), FieldConfig{3.5, 20.0}, Geometry{7.0, theta78}, 2);
    EXPECT_EQ(model.dimension(), 1 + 2 * static_cast<Eigen::Index>(model.single_states()) +
                                     static_cast<Eigen::Index>(small_basis().size()));
    const auto h = model.hamiltonian(1.2);
    EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    // rotating frame: the field-shifted single-atom target is on resonance
    EXPECT_NEAR(model.pair_reference_mhz(), 2 * model.single_reference_mhz(), 1e-9);
}

TEST(TwoAtomModel, BlockadeSuppressesDoubleExcitationAtShortRange) {
    const TwoAtomFullModel model(small_basis(), rb(), FieldConfig{3.5, 0.0}, Geometry{6.5, theta78}, 2);
    const auto areas = areas_to(4 * constants::pi, 32);
    const auto tr = model.evolve(1.2, times_for_pulse_areas(1.2, areas));
    double max_prr = 0.0;
    for (const auto& p : tr.points) max_prr = std::max(max_prr, p.p_rr());
    EXPECT_LT(max_prr, 0.2);
}

TEST(TwoAtomModel, FarApartAtomsAreIndependent) {
    const TwoAtomFullModel model(small_basis(), rb(), FieldConfig{3.5, 0.0}, Geometry{25.0, theta78}, 2);
    const auto areas = areas_to(2 * constants::pi, 16);
    const auto tr = model.evolve(1.2, times_for_pulse_areas(1.2, areas));
    for (std::size_t i = 0; i < areas.size(); ++i)
        EXPECT_NEAR(tr.points[i].p_rr(), std::pow(std::sin(areas[i] / 2), 4), 1e-3);
}

TEST(TwoAtomModel, ReusedPairHamiltonianGivesSameModel) {
    const FieldConfig f{6.9, 20.0};
    const PairHamiltonian h(small_basis(), rb(), FieldConfig{}, theta78, 2, SectorMode::full);
    const TwoAtomFullModel a(small_basis(), rb(), h.with_fields(small_basis(), rb(), f), 6.5);
    const TwoAtomFullModel b(small_basis(), rb(), f, Geometry{6.5, theta78}, 2);
    EXPECT_EQ((a.hamiltonian(1.2) - b.hamiltonian(1.2)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TwoAtomModel, RejectsUnsuitableInputs) {
    const PairHamiltonian sym(small_basis(), rb(), FieldConfig{3.5, 0.0}, theta78, 2, SectorMode::symmetric);
    EXPECT_THROW(TwoAtomFullModel(small_basis(), rb(), sym, 6.5), ConfigError);
    const auto other = AtomicState::make(61, 2, 1.5, 0.5);
    const auto mixed = build_pair_basis({target, other}, BasisCutoffs{300.0, 1, 3, 1, -1}, rb());
    EXPECT_THROW(TwoAtomFullModel(mixed, rb(), FieldConfig{}, Geometry{6.5, theta78}, 2), ConfigError);
    EXPECT_THROW(TwoAtomFullModel(small_basis(), rb(), FieldConfig{}, Geometry{-1.0, theta78}, 2), ConfigError);
}

TEST(TwoAtomSpinModel, LimitsOfTheCoupling) {
    const auto areas = areas_to(4 * constants::pi, 16);
    const auto t = times_for_pulse_areas(1.2, areas);
    const auto free = evolve_spin_model(two_atom_spin_model(6.5, theta78, 1.2, 0.0), full_basis(2), t.back(), t);
    for (std::size_t i = 0; i < areas.size(); ++i)
        EXPECT_NEAR(free.points[i].p_rr(), std::pow(std::sin(areas[i] / 2), 4), 1e-6);
    const auto blocked = evolve_spin_model(two_atom_spin_model(6.5, theta78, 1.2, -500.0), full_basis(2), t.back(), t);
    for (const auto& p : blocked.points) EXPECT_LT(p.p_rr(), 1e-4);
}
