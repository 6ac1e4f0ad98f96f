#include <gtest/gtest.h>

#include <sstream>

#include "mttsiam/ablation.hpp"
#include "mttsiam/settings.hpp"

using namespace mttsiam;

namespace {

std::vector<ScenarioConfig> small_suite() {
    std::vector<ScenarioConfig> s{*suite_scenario("cv_clean"), *suite_scenario("sine_distractors")};
    for (auto& c : s) c.frames = 60;
    return s;
}

AblationGrid small_grid(std::size_t threads) {
    AblationGrid g;
    g.template_counts = {1, 6};
    g.noise = {0.05};
    g.threads = threads;
    return g;
}

std::string table(std::span<const AblationRow> rows) {
    std::ostringstream os;
    write_ablation_table(os, rows);
    write_ablation_scenarios(os, rows);
    write_ablation_curves(os, rows);
    return os.str();
}

}  // namespace

TEST(Ablation, GridOrder) {
    const auto cells = grid_cells(AblationGrid{});
    ASSERT_EQ(cells.size(), 24u);
    EXPECT_EQ(cells[0].n, 1u);
    EXPECT_EQ(cells[0].mode, ThresholdMode::Adaptive);
    EXPECT_TRUE(cells[0].selector);
    EXPECT_EQ(cells[1].noise, 0.15);
    EXPECT_EQ(cells.back().n, 10u);
}

TEST(Ablation, CellPipelineRebuildsBag) {
    PipelineConfig base;
    base.bag.tau_min = 0.45;
    const auto pc = cell_pipeline({10, ThresholdMode::Constant, false, 0.05}, base);
    EXPECT_EQ(pc.bag.n, 10u);
    EXPECT_EQ(pc.bag.tau_min, 0.45);
    EXPECT_EQ(pc.bag.mode, ThresholdMode::Constant);
    EXPECT_FALSE(pc.selector.enabled);
    EXPECT_NO_THROW(pc.validate());
}

TEST(Ablation, ThreadCountDoesNotChangeOutput) {
    const auto suite = small_suite();
    const auto one = run_ablation(suite, small_grid(1));
    const auto three = run_ablation(suite, small_grid(3));
    EXPECT_EQ(table(one), table(three));
    ASSERT_EQ(one.size(), 8u);
    for (const auto& r : one) {
        EXPECT_FALSE(r.failed) << r.error;
        EXPECT_EQ(r.report.sequences.size(), 2u);
    }
}

TEST(Ablation, FailedScenarioMarksCell) {
    auto suite = small_suite();
    suite[1].frames = 2;  // invalid
    const auto rows = run_ablation(suite, small_grid(2));
    for (const auto& r : rows) EXPECT_TRUE(r.failed);
    std::ostringstream os;
    write_ablation_table(os, rows);
    EXPECT_NE(os.str().find(",,,failed: sine_distractors: scenario: frames must be >= 5"), std::string::npos);
}

TEST(Ablation, FilesWritten) {
    const auto dir = std::filesystem::temp_directory_path() / "mttsiam_ablation_files";
    std::filesystem::remove_all(dir);
    write_ablation_files(dir, run_ablation(small_suite(), small_grid(1)));
    for (const char* f : {"ablation.csv", "ablation_scenarios.csv", "ablation_success_curves.csv"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
}

TEST(Ablation, SingleTemplateSelectorOffIsTheRawBaseline) {
    const auto suite = small_suite();
    const auto rows = run_ablation(suite, small_grid(1));
    PipelineConfig raw;
    raw.bag = BagConfig::defaults(1);
    raw.selector.enabled = false;
    for (const auto& r : rows) {
        if (r.cell.n != 1 || r.cell.selector) continue;
        for (std::size_t i = 0; i < suite.size(); ++i) {
            const auto want = run_scenario(suite[i], raw);
            EXPECT_EQ(r.report.sequences[i].success_curve, want.success_curve);
            EXPECT_EQ(r.report.sequences[i].precision_curve, want.precision_curve);
        }
    }
}
