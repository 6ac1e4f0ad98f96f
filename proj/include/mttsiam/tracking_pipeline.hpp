#pragma once

// Per-frame tracking loop:
//   score every bag template -> fuse -> top-k candidates -> predict the next
//   center from the track history -> reliability selection -> state updates.

#include <concepts>
#include <cstddef>
#include <deque>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mttsiam/candidate_selector.hpp"
#include "mttsiam/combinet.hpp"
#include "mttsiam/geometry.hpp"
#include "mttsiam/score_fusion.hpp"
#include "mttsiam/template_bag.hpp"

namespace mttsiam {

/// What a backbone has to provide: template extraction at a box and a score
/// map for a template against a frame. Must be deterministic, with constant
/// grid dimensions over a sequence.
template <class S>
concept AppearanceScorer = requires(const S& s, const typename S::Frame& frame,
                                    const typename S::Template& tmpl, const BBox& box) {
    { s.make_template(frame, box) } -> std::convertible_to<typename S::Template>;
    { s.score(frame, tmpl) } -> std::same_as<ScoreMap>;
    { s.dims(frame) } -> std::convertible_to<ImageDims>;
};

enum class TrackStatus { Tracked, Lost };

enum class LostPolicy {
    /// Report the last tracked box while lost.
    HoldLast,
    /// Report an empty (zero) box while lost.
    ReportNothing,
};

struct PipelineConfig {
    BagConfig bag = BagConfig::defaults(6);
    SelectorConfig selector;
    std::size_t top_k = 10;
    std::size_t nms_radius = 2;
    LostPolicy lost_policy = LostPolicy::HoldLast;
    /// Only build a refresh template when the confidence can update the bag.
    bool lazy_templates = false;
    std::size_t history_capacity = 8;

    void validate() const {
        bag.validate();
        selector.validate();
        if (top_k < 1) throw ConfigError("pipeline: top_k must be >= 1");
        if (history_capacity < kWindowFrames) throw ConfigError("pipeline: history capacity must be >= 4");
    }
};

struct FrameResult {
    std::size_t frame = 0;
    BBox box;
    double confidence = 0.0;
    double rs = 0.0;
    TrackStatus status = TrackStatus::Lost;
    std::optional<std::size_t> updated_slot;
    std::vector<CandidateScore> diagnostics;
    /// Index of the winning (or best rejected) candidate.
    std::size_t selected = 0;
    Point predicted;
    /// Failure details: scorer errors, threshold errors.
    std::string note;
};

template <class Template>
struct TrackState {
    TemplateBag<Template> bag;
    SequentialConfidence sc;
    /// Normalized boxes of tracked frames, oldest first.
    std::deque<NormBBox> history;
    BBox last_output;
    TrackStatus status = TrackStatus::Tracked;
    std::size_t frame_index = 0;
};

template <AppearanceScorer Scorer>
class Tracker {
public:
    using Template = typename Scorer::Template;
    using Frame = typename Scorer::Frame;

    /// `scorer` and `model` must outlive the tracker. Without a model the
    /// predicted center falls back to linear extrapolation.
    Tracker(const Scorer& scorer, PipelineConfig config, const CombiNetModel* model = nullptr)
        : scorer_(&scorer), config_(std::move(config)), model_(model) {
        config_.validate();
    }

    const PipelineConfig& config() const { return config_; }
    bool initialized() const { return state_.has_value(); }
    const TrackState<Template>& state() const { return *state_; }

    void init(const Frame& first, const BBox& gt) {
        const ImageDims dims = scorer_->dims(first);
        const NormBBox n = normalize(gt, dims);
        Template tmpl = scorer_->make_template(first, gt);
        const double sc0 = config_.selector.enabled ? config_.selector.sc_init : 0.0;
        state_.emplace(TrackState<Template>{TemplateBag<Template>(config_.bag, std::move(tmpl)),
                                            SequentialConfidence(sc0),
                                            {n},
                                            gt,
                                            TrackStatus::Tracked,
                                            0});
    }

    FrameResult step(const Frame& frame) {
        if (!state_) throw Error("tracker: step before init");
        auto& st = *state_;
        FrameResult r;
        r.frame = st.frame_index++;
        const ImageDims dims = scorer_->dims(frame);

        std::vector<ScoreMap> maps;
        maps.reserve(st.bag.size());
        try {
            for (const auto& slot : st.bag.slots()) maps.push_back(scorer_->score(frame, slot.tmpl));
        } catch (const std::exception& e) {
            r.note = std::string("scorer failure: ") + e.what();
            mark_lost(st, r);
            return r;
        }

        const ScoreMap fused = fuse(maps, config_.bag.fusion_weights);
        const auto candidates = top_candidates(fused, config_.top_k, config_.nms_radius);
        const std::vector<NormBBox> history(st.history.begin(), st.history.end());
        r.predicted = predict_or_extrapolate(model_, history);
        const double sc = config_.selector.enabled ? st.sc.value() : 0.0;
        Selection sel = select(candidates, r.predicted, sc, dims, config_.selector);
        r.diagnostics = std::move(sel.diagnostics);
        r.selected = sel.index;
        r.rs = sel.rs;
        r.confidence = candidates[sel.index].confidence;

        if (!sel.tracked) {
            mark_lost(st, r);
            return r;
        }

        r.status = TrackStatus::Tracked;
        r.box = sel.box;
        st.status = TrackStatus::Tracked;
        st.last_output = sel.box;
        if (auto n = try_normalize(sel.box, dims)) {
            st.history.push_back(*n);
            if (st.history.size() > config_.history_capacity) st.history.pop_front();
        }
        if (config_.selector.enabled) st.sc.update(r.confidence, config_.selector);

        if (!config_.lazy_templates || r.confidence >= config_.bag.tau_min) {
            try {
                Template fresh = scorer_->make_template(frame, sel.box);
                r.updated_slot = st.bag.try_update(r.confidence, std::move(fresh), r.frame);
            } catch (const ConfigError& e) {
                r.note = e.what();
            } catch (const std::exception& e) {
                r.note = std::string("scorer failure: ") + e.what();
            }
        }
        return r;
    }

private:
    void mark_lost(TrackState<Template>& st, FrameResult& r) {
        r.status = TrackStatus::Lost;
        st.status = TrackStatus::Lost;
        if (config_.selector.enabled) st.sc.record_failure(config_.selector);
        r.box = config_.lost_policy == LostPolicy::HoldLast ? st.last_output : BBox{};
    }

    const Scorer* scorer_;
    PipelineConfig config_;
    const CombiNetModel* model_;
    std::optional<TrackState<Template>> state_;
};

/// Initializes on the first frame with `gt_first` and steps over every frame
/// (the first included).
template <AppearanceScorer Scorer>
std::vector<FrameResult> run_sequence(const Scorer& scorer,
                                      std::span<const typename Scorer::Frame> frames,
                                      const BBox& gt_first, const PipelineConfig& config,
                                      const CombiNetModel* model = nullptr) {
    if (frames.empty()) throw Error("run_sequence: no frames");
    Tracker<Scorer> tracker(scorer, config, model);
    tracker.init(frames.front(), gt_first);
    std::vector<FrameResult> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(tracker.step(f));
    return out;
}

}  // namespace mttsiam
