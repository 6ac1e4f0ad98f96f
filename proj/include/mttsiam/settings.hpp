#pragma once

// Typed view of the unified config document. Every key is optional; unknown
// keys are rejected with their file and line.
//
// Sections: bag. selector. fusion. pipeline. combinet. corpus. scenario. scorer.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mttsiam/combinet.hpp"
#include "mttsiam/config.hpp"
#include "mttsiam/corpus.hpp"
#include "mttsiam/synthetic_world.hpp"
#include "mttsiam/text.hpp"
#include "mttsiam/tracking_pipeline.hpp"

namespace mttsiam {

struct Settings {
    PipelineConfig pipeline;
    TrainConfig train;
    /// CombiNet model used by the tracker; empty means linear extrapolation.
    std::string model_path;
    CorpusConfig corpus;
    ScenarioConfig scenario;
};

namespace detail {

inline constexpr std::pair<const char*, ThresholdMode> kThresholdModes[] = {
    {"adaptive", ThresholdMode::Adaptive}, {"constant", ThresholdMode::Constant}};
inline constexpr std::pair<const char*, AverageMode> kAverageModes[] = {
    {"ema", AverageMode::Ema}, {"cumulative_mean", AverageMode::CumulativeMean}};
inline constexpr std::pair<const char*, DistanceMode> kDistanceModes[] = {
    {"sum", DistanceMode::Sum}, {"l1_mean", DistanceMode::L1Mean}};
inline constexpr std::pair<const char*, ScMode> kScModes[] = {
    {"binary", ScMode::Binary}, {"confidence", ScMode::Confidence}};
inline constexpr std::pair<const char*, LostPolicy> kLostPolicies[] = {
    {"hold", LostPolicy::HoldLast}, {"none", LostPolicy::ReportNothing}};
inline constexpr std::pair<const char*, LrSchedule> kSchedules[] = {
    {"literal", LrSchedule::Literal}, {"multiplicative", LrSchedule::Multiplicative}};
inline constexpr std::pair<const char*, MotionKind> kMotions[] = {
    {"constant_velocity", MotionKind::ConstantVelocity},
    {"sine_weave", MotionKind::SineWeave},
    {"random_walk", MotionKind::RandomWalk}};

template <class Enum, std::size_t N>
const char* name_of(Enum v, const std::pair<const char*, Enum> (&options)[N]) {
    for (const auto& [name, value] : options)
        if (value == v) return name;
    return "?";
}

inline std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + text::format_double(v[i]);
    return out;
}

inline std::vector<Occlusion> parse_occlusions(ConfigReader& r, const std::string& value,
                                               const ConfigEntry& e) {
    std::vector<Occlusion> out;
    if (text::trim(value).empty()) return out;
    for (auto item : text::split(value, ",")) {
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) r.fail(e, "occlusion '" + std::string(item) + "' is not start:length");
        const auto start = text::parse_int(item.substr(0, colon));
        const auto len = text::parse_int(item.substr(colon + 1));
        if (!start || !len || *start < 0 || *len < 0) r.fail(e, "bad occlusion '" + std::string(item) + "'");
        out.push_back({static_cast<std::size_t>(*start), static_cast<std::size_t>(*len)});
    }
    return out;
}

inline std::string format_occlusions(const std::vector<Occlusion>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? ", " : "") + std::to_string(v[i].start) + ":" + std::to_string(v[i].length);
    return out;
}

template <class T>
void assign(std::optional<T> v, T& dst) {
    if (v) dst = *v;
}

}  // namespace detail

/// Looks up a scenario of the frozen suite by name.
inline std::optional<ScenarioConfig> suite_scenario(const std::string& name) {
    for (auto& s : scenario_suite())
        if (s.name == name) return s;
    return std::nullopt;
}

/// Overlays `doc` on `base`. `bag.n` resets the bag to the defaults for that
/// size before the other bag keys apply; `scenario.suite` starts the scenario
/// from a frozen-suite entry.
inline Settings apply_document(const ConfigDocument& doc, Settings base = {}) {
    using namespace detail;
    ConfigReader r(doc);
    Settings s = std::move(base);

    // Bag.
    auto& bag = s.pipeline.bag;
    if (auto n = r.count("bag.n")) {
        if (*n < 1) r.fail(*doc.find("bag.n"), "must be >= 1");
        const double tau_min = bag.tau_min;
        const double alpha = bag.cbar_alpha;
        bag = BagConfig::defaults(*n);
        bag.tau_min = tau_min;
        bag.cbar_alpha = alpha;
    }
    assign(r.number("bag.tau_min"), bag.tau_min);
    assign(r.numbers("bag.slot_weights"), bag.slot_weights);
    assign(r.count("bag.above_mean_slots"), bag.above_mean_slots);
    assign(r.numbers("bag.fusion_weights"), bag.fusion_weights);
    assign(r.number("bag.cbar_alpha"), bag.cbar_alpha);
    assign(r.choice("bag.threshold_mode", kThresholdModes), bag.mode);
    assign(r.numbers("bag.constant_thresholds"), bag.constant_thresholds);
    assign(r.choice("bag.average", kAverageModes), bag.average);
    assign(r.flag("bag.freeze_cbar"), bag.freeze_cbar);

    // Selector.
    auto& sel = s.pipeline.selector;
    assign(r.number("selector.bonus_b"), sel.bonus_b);
    assign(r.number("selector.rw"), sel.rw);
    assign(r.number("selector.sc_alpha"), sel.sc_alpha);
    assign(r.number("selector.tau_select"), sel.tau_select);
    assign(r.number("selector.tau_conf"), sel.tau_conf);
    assign(r.choice("selector.de_mode", kDistanceModes), sel.de_mode);
    assign(r.choice("selector.sc_mode", kScModes), sel.sc_mode);
    assign(r.number("selector.sc_init"), sel.sc_init);
    assign(r.flag("selector.enabled"), sel.enabled);

    // Fusion and pipeline.
    assign(r.count("fusion.top_k"), s.pipeline.top_k);
    assign(r.count("fusion.nms_radius"), s.pipeline.nms_radius);
    assign(r.choice("pipeline.lost_policy", kLostPolicies), s.pipeline.lost_policy);
    assign(r.flag("pipeline.lazy_templates"), s.pipeline.lazy_templates);
    assign(r.count("pipeline.history_capacity"), s.pipeline.history_capacity);

    // CombiNet.
    auto& tc = s.train;
    assign(r.string("combinet.model"), s.model_path);
    assign(r.count("combinet.channels"), tc.shape.channels);
    assign(r.count("combinet.kernel"), tc.shape.kernel);
    assign(r.count("combinet.dense_width"), tc.shape.dense_width);
    assign(r.count("combinet.outputs"), tc.shape.outputs);
    assign(r.number("combinet.leak"), tc.shape.leak);
    assign(r.count("combinet.batch_size"), tc.batch_size);
    assign(r.number("combinet.momentum"), tc.momentum);
    assign(r.number("combinet.weight_decay"), tc.weight_decay);
    assign(r.count("combinet.epochs"), tc.epochs);
    assign(r.number("combinet.lr0"), tc.lr0);
    assign(r.number("combinet.lr_decay_base"), tc.lr_decay_base);
    assign(r.choice("combinet.schedule", kSchedules), tc.schedule);
    if (auto v = r.count("combinet.seed")) tc.seed = *v;

    // Training corpus.
    auto& cc = s.corpus;
    assign(r.count("corpus.sequences"), cc.sequences);
    assign(r.count("corpus.frames"), cc.frames);
    if (auto v = r.count("corpus.width")) cc.arena.width = static_cast<int>(*v);
    if (auto v = r.count("corpus.height")) cc.arena.height = static_cast<int>(*v);
    assign(r.number("corpus.min_speed"), cc.min_speed);
    assign(r.number("corpus.max_speed"), cc.max_speed);
    assign(r.number("corpus.min_size"), cc.min_size);
    assign(r.number("corpus.max_size"), cc.max_size);
    assign(r.number("corpus.jitter"), cc.jitter);
    if (auto v = r.count("corpus.seed")) cc.seed = *v;

    // Scenario and scorer.
    auto& sc = s.scenario;
    if (auto name = r.string("scenario.suite")) {
        auto base_scenario = suite_scenario(*name);
        if (!base_scenario) r.fail(*doc.find("scenario.suite"), "no suite scenario named '" + *name + "'");
        sc = *base_scenario;
    }
    assign(r.string("scenario.name"), sc.name);
    if (auto v = r.count("scenario.seed")) sc.seed = *v;
    assign(r.count("scenario.frames"), sc.frames);
    if (auto v = r.count("scenario.width")) sc.arena.width = static_cast<int>(*v);
    if (auto v = r.count("scenario.height")) sc.arena.height = static_cast<int>(*v);
    assign(r.choice("scenario.motion", kMotions), sc.motion);
    assign(r.number("scenario.speed"), sc.speed);
    assign(r.number("scenario.sine_amplitude"), sc.sine_amplitude);
    assign(r.number("scenario.sine_period"), sc.sine_period);
    assign(r.number("scenario.walk_sigma"), sc.walk_sigma);
    assign(r.number("scenario.target_width"), sc.target_w);
    assign(r.number("scenario.target_height"), sc.target_h);
    assign(r.count("scenario.distractors"), sc.distractors);
    assign(r.number("scenario.distractor_similarity"), sc.distractor_similarity);
    assign(r.number("scenario.distractor_speed"), sc.distractor_speed);
    assign(r.number("scenario.drift_rate"), sc.drift_rate);
    assign(r.number("scenario.drift_persistence"), sc.drift_persistence);
    if (auto v = r.string("scenario.occlusions"))
        sc.occlusions = parse_occlusions(r, *v, *doc.find("scenario.occlusions"));
    assign(r.count("scorer.grid"), sc.scorer.grid);
    assign(r.number("scorer.bump_sigma"), sc.scorer.bump_sigma);
    assign(r.number("scorer.noise"), sc.scorer.noise);
    assign(r.number("scorer.default_box"), sc.scorer.default_box);
    if (auto v = r.count("scorer.seed")) sc.scorer.seed = *v;

    r.reject_unknown();
    try {
        s.pipeline.validate();
        s.train.validate();
        s.corpus.validate();
        s.scenario.validate();
    } catch (const Error& e) {
        throw ConfigError(doc.source() + ": " + e.what());
    }
    return s;
}

/// Every setting as a document; apply_document(to_document(s)) == s.
inline ConfigDocument to_document(const Settings& s) {
    using namespace detail;
    using text::format_double;
    ConfigDocument d;
    const auto& bag = s.pipeline.bag;
    d.set("bag.n", std::to_string(bag.n));
    d.set("bag.tau_min", format_double(bag.tau_min));
    d.set("bag.slot_weights", join(bag.slot_weights));
    d.set("bag.above_mean_slots", std::to_string(bag.above_mean_slots));
    d.set("bag.fusion_weights", join(bag.fusion_weights));
    d.set("bag.cbar_alpha", format_double(bag.cbar_alpha));
    d.set("bag.threshold_mode", name_of(bag.mode, kThresholdModes));
    d.set("bag.constant_thresholds", join(bag.constant_thresholds));
    d.set("bag.average", name_of(bag.average, kAverageModes));
    d.set("bag.freeze_cbar", bag.freeze_cbar ? "true" : "false");

    const auto& sel = s.pipeline.selector;
    d.set("selector.bonus_b", format_double(sel.bonus_b));
    d.set("selector.rw", format_double(sel.rw));
    d.set("selector.sc_alpha", format_double(sel.sc_alpha));
    d.set("selector.tau_select", format_double(sel.tau_select));
    d.set("selector.tau_conf", format_double(sel.tau_conf));
    d.set("selector.de_mode", name_of(sel.de_mode, kDistanceModes));
    d.set("selector.sc_mode", name_of(sel.sc_mode, kScModes));
    d.set("selector.sc_init", format_double(sel.sc_init));
    d.set("selector.enabled", sel.enabled ? "true" : "false");

    d.set("fusion.top_k", std::to_string(s.pipeline.top_k));
    d.set("fusion.nms_radius", std::to_string(s.pipeline.nms_radius));
    d.set("pipeline.lost_policy", name_of(s.pipeline.lost_policy, kLostPolicies));
    d.set("pipeline.lazy_templates", s.pipeline.lazy_templates ? "true" : "false");
    d.set("pipeline.history_capacity", std::to_string(s.pipeline.history_capacity));

    const auto& tc = s.train;
    d.set("combinet.model", s.model_path);
    d.set("combinet.channels", std::to_string(tc.shape.channels));
    d.set("combinet.kernel", std::to_string(tc.shape.kernel));
    d.set("combinet.dense_width", std::to_string(tc.shape.dense_width));
    d.set("combinet.outputs", std::to_string(tc.shape.outputs));
    d.set("combinet.leak", format_double(tc.shape.leak));
    d.set("combinet.batch_size", std::to_string(tc.batch_size));
    d.set("combinet.momentum", format_double(tc.momentum));
    d.set("combinet.weight_decay", format_double(tc.weight_decay));
    d.set("combinet.epochs", std::to_string(tc.epochs));
    d.set("combinet.lr0", format_double(tc.lr0));
    d.set("combinet.lr_decay_base", format_double(tc.lr_decay_base));
    d.set("combinet.schedule", name_of(tc.schedule, kSchedules));
    d.set("combinet.seed", std::to_string(tc.seed));

    const auto& cc = s.corpus;
    d.set("corpus.sequences", std::to_string(cc.sequences));
    d.set("corpus.frames", std::to_string(cc.frames));
    d.set("corpus.width", std::to_string(cc.arena.width));
    d.set("corpus.height", std::to_string(cc.arena.height));
    d.set("corpus.min_speed", format_double(cc.min_speed));
    d.set("corpus.max_speed", format_double(cc.max_speed));
    d.set("corpus.min_size", format_double(cc.min_size));
    d.set("corpus.max_size", format_double(cc.max_size));
    d.set("corpus.jitter", format_double(cc.jitter));
    d.set("corpus.seed", std::to_string(cc.seed));

    const auto& sc = s.scenario;
    d.set("scenario.name", sc.name);
    d.set("scenario.seed", std::to_string(sc.seed));
    d.set("scenario.frames", std::to_string(sc.frames));
    d.set("scenario.width", std::to_string(sc.arena.width));
    d.set("scenario.height", std::to_string(sc.arena.height));
    d.set("scenario.motion", name_of(sc.motion, kMotions));
    d.set("scenario.speed", format_double(sc.speed));
    d.set("scenario.sine_amplitude", format_double(sc.sine_amplitude));
    d.set("scenario.sine_period", format_double(sc.sine_period));
    d.set("scenario.walk_sigma", format_double(sc.walk_sigma));
    d.set("scenario.target_width", format_double(sc.target_w));
    d.set("scenario.target_height", format_double(sc.target_h));
    d.set("scenario.distractors", std::to_string(sc.distractors));
    d.set("scenario.distractor_similarity", format_double(sc.distractor_similarity));
    d.set("scenario.distractor_speed", format_double(sc.distractor_speed));
    d.set("scenario.drift_rate", format_double(sc.drift_rate));
    d.set("scenario.drift_persistence", format_double(sc.drift_persistence));
    d.set("scenario.occlusions", format_occlusions(sc.occlusions));
    d.set("scorer.grid", std::to_string(sc.scorer.grid));
    d.set("scorer.bump_sigma", format_double(sc.scorer.bump_sigma));
    d.set("scorer.noise", format_double(sc.scorer.noise));
    d.set("scorer.default_box", format_double(sc.scorer.default_box));
    d.set("scorer.seed", std::to_string(sc.scorer.seed));
    return d;
}

inline Settings load_settings(const std::filesystem::path& path) {
    return apply_document(ConfigDocument::load(path));
}

}  // namespace mttsiam
