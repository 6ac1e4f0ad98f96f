#pragma once

// Sweeps of pipeline settings over the synthetic scenario suite.
//
// The grid is template count x threshold mode x selector on/off x scorer
// noise. Every (cell, scenario) pair runs as an independent job; results are
// reduced in grid order, so the table does not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mttsiam/eval_harness.hpp"
#include "mttsiam/synthetic_world.hpp"
#include "mttsiam/text.hpp"
#include "mttsiam/tracking_pipeline.hpp"

namespace mttsiam {

/// Tracks one synthetic scenario and scores it against its own ground truth.
inline SequenceMetrics run_scenario(const ScenarioConfig& scenario, const PipelineConfig& pipeline,
                                    const CombiNetModel* model = nullptr,
                                    std::vector<FrameResult>* results = nullptr) {
    const auto world = generate(scenario);
    const auto scorer = mock_scorer(world, scenario.scorer);
    auto out = run_sequence(scorer, std::span<const WorldFrame>(world), world.front().target_box, pipeline, model);
    const auto metrics = sequence_metrics(predictions_from(std::span<const FrameResult>(out)),
                                          annotation_from_world(scenario.name, world));
    if (results) *results = std::move(out);
    return metrics;
}

struct AblationGrid {
    std::vector<std::size_t> template_counts{1, 6, 10};
    std::vector<ThresholdMode> threshold_modes{ThresholdMode::Adaptive, ThresholdMode::Constant};
    std::vector<bool> selector{true, false};
    std::vector<double> noise{0.05, 0.15};
    /// Settings shared by every cell. The bag is rebuilt from
    /// BagConfig::defaults(n) keeping tau_min, cbar_alpha and the average mode.
    PipelineConfig base;
    /// 0 uses the hardware concurrency.
    std::size_t threads = 0;
};

struct AblationCell {
    std::size_t n = 6;
    ThresholdMode mode = ThresholdMode::Adaptive;
    bool selector = true;
    double noise = 0.05;
};

struct AblationRow {
    AblationCell cell;
    bool failed = false;
    std::string error;
    /// Suite-level report; empty when failed.
    MetricReport report;
};

inline PipelineConfig cell_pipeline(const AblationCell& cell, const PipelineConfig& base) {
    PipelineConfig pc = base;
    pc.bag = BagConfig::defaults(cell.n);
    pc.bag.tau_min = base.bag.tau_min;
    pc.bag.cbar_alpha = base.bag.cbar_alpha;
    pc.bag.average = base.bag.average;
    pc.bag.freeze_cbar = base.bag.freeze_cbar;
    pc.bag.mode = cell.mode;
    pc.selector.enabled = cell.selector;
    return pc;
}

inline std::vector<AblationCell> grid_cells(const AblationGrid& grid) {
    std::vector<AblationCell> cells;
    for (auto n : grid.template_counts)
        for (auto m : grid.threshold_modes)
            for (bool s : grid.selector)
                for (double z : grid.noise) cells.push_back({n, m, s, z});
    return cells;
}

inline std::vector<AblationRow> run_ablation(std::span<const ScenarioConfig> suite, const AblationGrid& grid,
                                             const CombiNetModel* model = nullptr) {
    if (suite.empty()) throw Error("ablation: empty scenario suite");
    const auto cells = grid_cells(grid);
    const std::size_t jobs = cells.size() * suite.size();

    struct Outcome {
        SequenceMetrics metrics;
        std::string error;
    };
    std::vector<Outcome> outcomes(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs; j = next++) {
            const auto& cell = cells[j / suite.size()];
            ScenarioConfig sc = suite[j % suite.size()];
            sc.scorer.noise = cell.noise;
            try {
                outcomes[j].metrics = run_scenario(sc, cell_pipeline(cell, grid.base), model);
            } catch (const std::exception& e) {
                outcomes[j].error = sc.name + ": " + e.what();
            }
        }
    };
    std::size_t threads = grid.threads ? grid.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, jobs);
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }

    std::vector<AblationRow> rows;
    rows.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        AblationRow row{cells[c], false, {}, {}};
        std::vector<SequenceMetrics> per;
        for (std::size_t s = 0; s < suite.size(); ++s) {
            auto& o = outcomes[c * suite.size() + s];
            if (!o.error.empty() && !row.failed) {
                row.failed = true;
                row.error = o.error;
            }
            per.push_back(std::move(o.metrics));
        }
        if (!row.failed) row.report = aggregate(std::move(per));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline const char* threshold_mode_name(ThresholdMode m) {
    return m == ThresholdMode::Adaptive ? "adaptive" : "constant";
}

namespace detail {

inline void write_cell(std::ostream& os, const AblationCell& c) {
    os << c.n << ',' << threshold_mode_name(c.mode) << ',' << (c.selector ? "on" : "off") << ','
       << text::format_double(c.noise);
}

}  // namespace detail

/// One line per cell: n,threshold_mode,selector,noise,success_auc,precision_at_20,status.
/// Failed cells leave the metric columns empty and carry the error after `failed:`.
inline void write_ablation_table(std::ostream& os, std::span<const AblationRow> rows) {
    os << "n,threshold_mode,selector,noise,success_auc,precision_at_20,status\n";
    for (const auto& r : rows) {
        detail::write_cell(os, r.cell);
        if (r.failed) {
            std::string msg = r.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            os << ",,,failed: " << msg << '\n';
        } else {
            os << ',' << text::format_double(r.report.success_auc) << ','
               << text::format_double(r.report.precision_at_20) << ",ok\n";
        }
    }
}

/// Per-scenario breakdown: n,threshold_mode,selector,noise,scenario,success_auc,precision_at_20.
inline void write_ablation_scenarios(std::ostream& os, std::span<const AblationRow> rows) {
    os << "n,threshold_mode,selector,noise,scenario,success_auc,precision_at_20\n";
    for (const auto& r : rows) {
        for (const auto& s : r.report.sequences) {
            detail::write_cell(os, r.cell);
            os << ',' << s.name << ',' << text::format_double(s.success_auc) << ','
               << text::format_double(s.precision_at_20) << '\n';
        }
    }
}

/// Suite-level success curves, one column per cell, for plotting.
inline void write_ablation_curves(std::ostream& os, std::span<const AblationRow> rows) {
    os << "threshold";
    for (const auto& r : rows) {
        os << ",n" << r.cell.n << '_' << threshold_mode_name(r.cell.mode) << "_sel" << (r.cell.selector ? "on" : "off")
           << "_noise" << text::format_double(r.cell.noise);
    }
    os << '\n';
    for (std::size_t i = 0; i < kSuccessPoints; ++i) {
        os << text::format_double(success_threshold(i));
        for (const auto& r : rows) {
            os << ',';
            if (!r.failed) os << text::format_double(r.report.success_curve[i]);
        }
        os << '\n';
    }
}

/// ablation.csv, ablation_scenarios.csv and ablation_success_curves.csv under `dir`.
inline void write_ablation_files(const std::filesystem::path& dir, std::span<const AblationRow> rows) {
    std::filesystem::create_directories(dir);
    std::ofstream table(dir / "ablation.csv");
    write_ablation_table(table, rows);
    std::ofstream per(dir / "ablation_scenarios.csv");
    write_ablation_scenarios(per, rows);
    std::ofstream curves(dir / "ablation_success_curves.csv");
    write_ablation_curves(curves, rows);
    if (!table || !per || !curves) throw Error(dir.string() + ": write failed");
}

}  // namespace mttsiam
