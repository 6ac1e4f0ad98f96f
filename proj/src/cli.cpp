#include "mttsiam/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mttsiam/ablation.hpp"
#include "mttsiam/combinet.hpp"
#include "mttsiam/corpus.hpp"
#include "mttsiam/eval_harness.hpp"
#include "mttsiam/settings.hpp"
#include "mttsiam/synthetic_world.hpp"
#include "mttsiam/text.hpp"
#include "mttsiam/tracking_pipeline.hpp"

namespace mttsiam::cli {
namespace {

namespace fs = std::filesystem;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Seed override");
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

Settings load(const CommonOptions& o) {
    return o.config.empty() ? apply_document(ConfigDocument{}) : load_settings(o.config);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw Error(path.string() + ": cannot write");
    return os;
}

/// Scenario from the settings, optionally replaced by a suite entry and reseeded.
ScenarioConfig pick_scenario(const Settings& s, const std::string& suite_name,
                             std::optional<std::uint64_t> seed) {
    ScenarioConfig sc = s.scenario;
    if (!suite_name.empty()) {
        auto found = suite_scenario(suite_name);
        if (!found) throw ConfigError("no suite scenario named '" + suite_name + "'");
        sc = *found;
    }
    if (seed) {
        sc.seed = *seed;
        sc.scorer.seed = *seed * 7919;
    }
    sc.validate();
    return sc;
}

Layout parse_layout(const std::string& name) { return name == "got10k" ? Layout::Got10k : Layout::Otb; }

void write_world_csv(std::ostream& os, const std::vector<WorldFrame>& world) {
    os << "frame,entity,x,y,w,h,target,visible\n";
    for (const auto& f : world) {
        if (!f.target_visible) {
            os << f.index << ',' << f.target_id << ',' << text::format_double(f.target_box.x) << ','
               << text::format_double(f.target_box.y) << ',' << text::format_double(f.target_box.w) << ','
               << text::format_double(f.target_box.h) << ",1,0\n";
        }
        for (const auto& e : f.entities) {
            os << f.index << ',' << e.id << ',' << text::format_double(e.box.x) << ','
               << text::format_double(e.box.y) << ',' << text::format_double(e.box.w) << ','
               << text::format_double(e.box.h) << ',' << (e.id == f.target_id ? 1 : 0) << ",1\n";
        }
    }
}

void export_annotation(const fs::path& dir, const SequenceAnnotation& seq, Layout layout) {
    if (layout == Layout::Got10k) write_got10k_sequence(dir, seq);
    else write_otb_sequence(dir, seq);
}

void write_settings(const fs::path& path, const Settings& s) {
    auto os = open_out(path);
    to_document(s).write(os);
}

// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::string scenario;
    std::string export_layout = "otb";
};

int simulate(const CommonOptions& common, const SimulateOptions& o, std::ostream& out) {
    Settings s = load(common);
    s.scenario = pick_scenario(s, o.scenario, common.seed);
    const auto world = generate(s.scenario);
    const fs::path dir = common.out;
    fs::create_directories(dir);
    {
        auto os = open_out(dir / (s.scenario.name + ".world.csv"));
        write_world_csv(os, world);
    }
    if (o.export_layout != "none")
        export_annotation(dir / "annotations", annotation_from_world(s.scenario.name, world),
                          parse_layout(o.export_layout));
    write_settings(dir / "settings.cfg", s);
    out << "simulated " << s.scenario.name << ": " << world.size() << " frames -> " << dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string corpus;
    std::string layout = "got10k";
    bool synthetic = false;
};

int train_combinet(const CommonOptions& common, const TrainOptions& o, std::ostream& out, std::ostream& err) {
    Settings s = load(common);
    if (common.seed) {
        s.train.seed = *common.seed;
        s.corpus.seed = *common.seed;
    }
    std::vector<AnnotatedTrack> tracks;
    if (o.synthetic) {
        tracks = constant_velocity_corpus(s.corpus);
    } else {
        std::vector<std::string> warnings;
        for (const auto& seq : load_annotations(o.corpus, parse_layout(o.layout), &warnings))
            tracks.push_back(seq.to_track());
        for (const auto& w : warnings) err << "warning: " << w << '\n';
    }
    const WindowSet windows = load_windows(tracks);
    if (windows.samples.empty()) throw Error("train-combinet: corpus yields no five-frame windows");
    const TrainResult result = train(windows.samples, s.train);

    const fs::path dir = common.out;
    fs::create_directories(dir);
    save_model(result.model, (dir / "model.txt").string());
    {
        auto os = open_out(dir / "loss.csv");
        os << "epoch,lr,loss\n";
        for (std::size_t e = 0; e < result.log.epoch_loss.size(); ++e)
            os << e << ',' << text::format_double(result.log.epoch_lr[e]) << ','
               << text::format_double(result.log.epoch_loss[e]) << '\n';
    }
    {
        auto os = open_out(dir / "train_report.txt");
        os << "tracks = " << tracks.size() << '\n';
        os << "skipped_tracks = " << windows.skipped_tracks << '\n';
        os << "samples = " << windows.samples.size() << '\n';
        os << "final_loss = " << text::format_double(result.log.epoch_loss.back()) << '\n';
        os << "train_center_error = " << text::format_double(mean_center_error(&result.model, windows.samples))
           << '\n';
        os << "extrapolation_center_error = "
           << text::format_double(mean_center_error(nullptr, windows.samples)) << '\n';
    }
    write_settings(dir / "settings.cfg", s);
    out << "trained on " << windows.samples.size() << " windows, final loss "
        << text::format_double(result.log.epoch_loss.back()) << " -> " << (dir / "model.txt").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrackOptions {
    std::string scenario;
    std::string annotations;
    std::string layout = "otb";
    std::string model;
};

int track(const CommonOptions& common, const TrackOptions& o, std::ostream& out, std::ostream& err) {
    Settings s = load(common);
    if (!o.model.empty()) s.model_path = o.model;
    std::optional<CombiNetModel> model;
    if (!s.model_path.empty()) model = load_model(s.model_path);
    const CombiNetModel* net = model ? &*model : nullptr;

    struct Job {
        std::string name;
        std::vector<WorldFrame> world;
        ScorerParams scorer;
    };
    std::vector<Job> jobs;
    if (!o.annotations.empty()) {
        ScenarioConfig sc = pick_scenario(s, o.scenario, common.seed);
        std::vector<std::string> warnings;
        for (const auto& seq : load_annotations(o.annotations, parse_layout(o.layout), &warnings))
            jobs.push_back({seq.name, generate_along(sc, seq.dims, seq.gt), sc.scorer});
        for (const auto& w : warnings) err << "warning: " << w << '\n';
        if (jobs.empty()) throw Error(o.annotations + ": nothing to track");
    } else {
        ScenarioConfig sc = pick_scenario(s, o.scenario, common.seed);
        jobs.push_back({sc.name, generate(sc), sc.scorer});
    }

    const fs::path dir = common.out;
    fs::create_directories(dir);
    for (const auto& job : jobs) {
        const auto scorer = mock_scorer(job.world, job.scorer);
        const auto results = run_sequence(scorer, std::span<const WorldFrame>(job.world),
                                          job.world.front().target_box, s.pipeline, net);
        {
            auto os = open_out(dir / (job.name + ".results.csv"));
            write_results(os, results);
        }
        export_annotation(dir / "annotations", annotation_from_world(job.name, job.world), Layout::Otb);
        const auto tracked = std::count_if(results.begin(), results.end(),
                                           [](const FrameResult& r) { return r.status == TrackStatus::Tracked; });
        out << job.name << ": " << tracked << "/" << results.size() << " frames tracked\n";
    }
    write_settings(dir / "settings.cfg", s);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string results;
    std::string annotations;
    std::string layout = "otb";
};

constexpr std::string_view kResultsSuffix = ".results.csv";

int eval(const CommonOptions& common, const EvalOptions& o, std::ostream& out, std::ostream& err) {
    std::vector<std::string> warnings;
    const auto sequences = load_annotations(o.annotations, parse_layout(o.layout), &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    if (sequences.empty()) throw Error(o.annotations + ": no sequences to evaluate");

    auto results_for = [&](const SequenceAnnotation& seq) -> fs::path {
        const fs::path r = o.results;
        if (fs::is_directory(r)) return r / (seq.name + std::string(kResultsSuffix));
        if (sequences.size() == 1) return r;
        throw Error("eval: a single results file needs a single annotated sequence, got " +
                    std::to_string(sequences.size()));
    };

    std::vector<SequenceMetrics> per;
    for (const auto& seq : sequences) {
        const fs::path file = results_for(seq);
        if (!fs::exists(file)) throw Error(file.string() + ": missing results for sequence " + seq.name);
        const auto records = read_results(file);
        const auto predictions = predictions_from(std::span<const ResultRecord>(records));
        per.push_back(sequence_metrics(predictions, seq));
    }
    const MetricReport report = aggregate(std::move(per));
    write_report_files(common.out, report);
    out << "success_auc = " << text::format_double(report.success_auc)
        << "  precision_at_20 = " << text::format_double(report.precision_at_20) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct AblateOptions {
    std::vector<std::string> scenarios;
    std::size_t threads = 0;
};

int ablate(const CommonOptions& common, const AblateOptions& o, std::ostream& out) {
    const Settings s = load(common);
    std::vector<ScenarioConfig> suite;
    const auto all = scenario_suite();
    if (o.scenarios.empty()) {
        suite = all;
    } else {
        for (const auto& name : o.scenarios) {
            auto found = suite_scenario(name);
            if (!found) throw ConfigError("no suite scenario named '" + name + "'");
            suite.push_back(*found);
        }
    }
    if (common.seed) {
        for (std::size_t i = 0; i < suite.size(); ++i) {
            suite[i].seed = *common.seed + i;
            suite[i].scorer.seed = suite[i].seed * 7919;
        }
    }
    std::optional<CombiNetModel> model;
    if (!s.model_path.empty()) model = load_model(s.model_path);

    AblationGrid grid;
    grid.base = s.pipeline;
    grid.threads = o.threads;
    const auto rows = run_ablation(suite, grid, model ? &*model : nullptr);
    write_ablation_files(common.out, rows);
    write_settings(fs::path(common.out) / "settings.cfg", s);
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.failed ? 1 : 0;
    out << rows.size() << " cells over " << suite.size() << " scenarios";
    if (failed) out << ", " << failed << " failed";
    out << " -> " << common.out << '\n';
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-template Siamese tracking framework: simulation, training, tracking, evaluation"};
    app.name("mttsiam");
    app.require_subcommand(1);

    CommonOptions common;

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic scenario");
    add_common(sim_cmd, common);
    sim_cmd->add_option("--scenario", sim.scenario, "Suite scenario name (default: scenario.* from config)");
    sim_cmd->add_option("--export", sim.export_layout, "Annotation export layout")
        ->check(CLI::IsMember({"otb", "got10k", "none"}))
        ->capture_default_str();

    TrainOptions tr;
    auto* tr_cmd = app.add_subcommand("train-combinet", "Train the motion predictor");
    add_common(tr_cmd, common);
    auto* corpus_opt = tr_cmd->add_option("--corpus", tr.corpus, "Annotation directory")->check(CLI::ExistingDirectory);
    tr_cmd->add_option("--layout", tr.layout, "Corpus layout")
        ->check(CLI::IsMember({"otb", "got10k"}))
        ->capture_default_str();
    auto* synth_opt = tr_cmd->add_flag("--synthetic", tr.synthetic, "Use the constant-velocity corpus (corpus.* keys)");
    corpus_opt->excludes(synth_opt);
    tr_cmd->callback([&] {
        if (tr.corpus.empty() && !tr.synthetic) throw CLI::ValidationError("train-combinet", "need --corpus or --synthetic");
    });

    TrackOptions tk;
    auto* tk_cmd = app.add_subcommand("track", "Track a scenario or annotated sequences");
    add_common(tk_cmd, common);
    tk_cmd->add_option("--scenario", tk.scenario, "Suite scenario name");
    tk_cmd->add_option("--annotations", tk.annotations, "Annotation directory; the target follows its boxes")
        ->check(CLI::ExistingDirectory);
    tk_cmd->add_option("--layout", tk.layout, "Annotation layout")
        ->check(CLI::IsMember({"otb", "got10k"}))
        ->capture_default_str();
    tk_cmd->add_option("--model", tk.model, "CombiNet model file (overrides combinet.model)")
        ->check(CLI::ExistingFile);

    EvalOptions ev;
    auto* ev_cmd = app.add_subcommand("eval", "Score results against annotations");
    add_common(ev_cmd, common);
    ev_cmd->add_option("--results", ev.results, "Results file or directory of <name>.results.csv")
        ->required()
        ->check(CLI::ExistingPath);
    ev_cmd->add_option("--annotations", ev.annotations, "Annotation directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    ev_cmd->add_option("--layout", ev.layout, "Annotation layout")
        ->check(CLI::IsMember({"otb", "got10k"}))
        ->capture_default_str();

    AblateOptions ab;
    auto* ab_cmd = app.add_subcommand("ablate", "Sweep n x threshold mode x selector x noise over the suite");
    add_common(ab_cmd, common);
    ab_cmd->add_option("--scenarios", ab.scenarios, "Subset of suite scenarios")->delimiter(',');
    ab_cmd->add_option("--threads", ab.threads, "Worker threads (0 = all cores)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (sim_cmd->parsed()) return simulate(common, sim, out);
        if (tr_cmd->parsed()) return train_combinet(common, tr, out, err);
        if (tk_cmd->parsed()) return track(common, tk, out, err);
        if (ev_cmd->parsed()) return eval(common, ev, out, err);
        if (ab_cmd->parsed()) return ablate(common, ab, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace mttsiam::cli
