#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rydmap/run.hpp"
#include "rydmap/scan.hpp"

using namespace rydmap;
namespace fs = std::filesystem;

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

ScanSpec small_spec(bool maximize) {
    ScanSpec s;
    s.b_gauss = {3.5, 6.9};
    s.theta_rad = {0.0, 78.0 * constants::pi / 180.0};
    s.e_policy.maximize = maximize;
    s.e_policy.step_mv_cm = 10.0;
    s.r_um = 6.5;
    s.window.samples = 16;
    return s;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "rydmap_test_scan";
    fs::create_directories(dir);
    const auto p = dir / name;
    fs::remove(p);
    return p;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
}

}  // namespace

TEST(LongTimeAverage, IndependentAtomsGiveThreeEighths) {
    // the mean of sin^4 over whole Rabi periods is 3/8, and the midpoint rule
    // is exact for it once there are more than four samples per period
    const TwoAtomFullModel model(small_basis(), rb(), FieldConfig{3.5, 0.0}, Geometry{6.5, 1.0}, 2, false);
    EXPECT_NEAR(long_time_prr(model, 1.2, AveragingWindow{}).prr_mean, 3.0 / 8.0, 1e-9);
}

TEST(LongTimeAverage, WindowAreas) {
    const AveragingWindow w;
    const auto a = w.areas();
    ASSERT_EQ(a.size(), 64u);
    EXPECT_NEAR(a.front(), 4 * constants::pi + 2 * constants::pi / 64, 1e-12);
    EXPECT_NEAR(a.back(), 8 * constants::pi - 2 * constants::pi / 64, 1e-12);
    EXPECT_THROW((AveragingWindow{2.0, 1.0, 8}.validate()), ConfigError);
    EXPECT_THROW((AveragingWindow{1.0, 2.0, 0}.validate()), ConfigError);
}

TEST(WorstCase, SingleFieldValueIsItsOwnMaximum) {
    const auto r = worst_case_efield(small_basis(), rb(), 3.5, Geometry{6.5, 1.0}, 2, 1.2, {20.0});
    ASSERT_EQ(r.samples.size(), 1u);
    EXPECT_EQ(r.e_star_mv_cm, 20.0);
    EXPECT_EQ(r.prr_mean, *r.samples[0].prr_mean);
    EXPECT_THROW(worst_case_efield(small_basis(), rb(), 3.5, Geometry{6.5, 1.0}, 2, 1.2, {}), ConfigError);
}

TEST(WorstCase, TiesGoToSmallestFieldAndFailuresAreSkipped) {
    WorstCaseResult r;
    r.samples = {{4.0, 0.2, ""}, {0.0, std::nullopt, "boom"}, {2.0, 0.3, ""}, {6.0, 0.3, ""}};
    select_worst_case(r);
    EXPECT_EQ(r.e_star_mv_cm, 2.0);
    EXPECT_EQ(r.prr_mean, 0.3);
    WorstCaseResult none;
    none.samples = {{0.0, std::nullopt, "a"}};
    EXPECT_FALSE(none.any_success());
}

TEST(WorstCase, DominatesZeroField) {
    const Geometry g{6.5, 78.0 * constants::pi / 180.0};
    const auto zero = worst_case_efield(small_basis(), rb(), 6.9, g, 2, 1.2, {0.0});
    const auto worst = worst_case_efield(small_basis(), rb(), 6.9, g, 2, 1.2, linear_grid(0.0, 20.0, 5.0));
    EXPECT_GE(worst.prr_mean, zero.prr_mean);
    EXPECT_EQ(*worst.samples.front().prr_mean, zero.prr_mean);
}

TEST(GridScan, OneByOneGrid) {
    ScanSpec s = small_spec(false);
    s.b_gauss = {3.5};
    s.theta_rad = {0.0};
    const auto r = grid_scan(s, small_basis(), rb());
    ASSERT_EQ(r.points.size(), 1u);
    EXPECT_TRUE(r.at(0, 0).ok());
    EXPECT_GE(r.at(0, 0).result.prr_mean, 0.0);
    EXPECT_LE(r.at(0, 0).result.prr_mean, 1.0);
}

TEST(GridScan, CheckpointResumeReproducesResult) {
    const auto spec = small_spec(true);
    const auto hash = scan_spec_hash(spec);
    const auto path = scratch("resume.jsonl");
    ScanResult first;
    {
        ScanCheckpoint cp(path.string(), hash);
        first = grid_scan(spec, small_basis(), rb(), &cp, Parallelism{2});
    }
    const auto lines = line_count(path);
    EXPECT_EQ(lines, 1 + spec.b_gauss.size() * spec.theta_rad.size());

    // an interrupted append leaves a torn last line, which is ignored
    {
        std::ofstream out(path, std::ios::app);
        out << "{\"ib\": 0, \"it";
    }
    ScanCheckpoint cp(path.string(), hash);
    EXPECT_EQ(cp.completed(), 4u);
    const auto second = grid_scan(spec, small_basis(), rb(), &cp);
    for (std::size_t ib = 0; ib < 2; ++ib) {
        for (std::size_t it = 0; it < 2; ++it) {
            EXPECT_EQ(first.at(ib, it).result.prr_mean, second.at(ib, it).result.prr_mean);
            EXPECT_EQ(first.at(ib, it).result.e_star_mv_cm, second.at(ib, it).result.e_star_mv_cm);
            ASSERT_EQ(first.at(ib, it).result.samples.size(), second.at(ib, it).result.samples.size());
        }
    }
}

TEST(GridScan, CheckpointOfAnotherSpecRefused) {
    const auto path = scratch("other.jsonl");
    { ScanCheckpoint cp(path.string(), scan_spec_hash(small_spec(true))); }
    EXPECT_THROW(ScanCheckpoint(path.string(), scan_spec_hash(small_spec(false))), ConfigError);
}

TEST(GridScan, ParallelMatchesSerial) {
    ScanSpec s = small_spec(false);
    const auto a = grid_scan(s, small_basis(), rb(), nullptr, Parallelism{1});
    const auto b = grid_scan(s, small_basis(), rb(), nullptr, Parallelism{3});
    for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].result.prr_mean, b.points[i].result.prr_mean);
}

TEST(GridScan, InvalidSpecRejected) {
    ScanSpec s = small_spec(false);
    s.b_gauss.clear();
    EXPECT_THROW(grid_scan(s, small_basis(), rb()), ConfigError);
    s = small_spec(true);
    s.e_policy.step_mv_cm = 0.0;
    EXPECT_THROW(s.validate(), ConfigError);
}
