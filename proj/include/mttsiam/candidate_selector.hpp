#pragma once

// Path-aware candidate selection.
//
// Each candidate j gets a distance error against the predicted center and a
// reliability score
//
//     RS_j = C_j - (DE_j - b) * SC * (1 - C_j) / RW
//
// where SC is the sequential confidence of recent frames. The best RS wins if
// it clears tau_select; otherwise the target is declared lost.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mttsiam/error.hpp"
#include "mttsiam/geometry.hpp"
#include "mttsiam/score_fusion.hpp"

namespace mttsiam {

enum class DistanceMode {
    /// |pc1 + pc2 - cc1 - cc2| / 2
    Sum,
    /// (|pc1 - cc1| + |pc2 - cc2|) / 2
    L1Mean,
};

/// What the sequential confidence averages.
enum class ScMode {
    /// 1 when C >= tau_conf, else 0.
    Binary,
    /// The raw confidence C.
    Confidence,
};

struct SelectorConfig {
    double bonus_b = 0.1;
    double rw = 0.1;
    double sc_alpha = 0.1;
    double tau_select = 0.5;
    double tau_conf = 0.6;
    DistanceMode de_mode = DistanceMode::L1Mean;
    ScMode sc_mode = ScMode::Binary;
    double sc_init = 0.5;
    /// When false SC is pinned at 0 and selection reduces to argmax C.
    bool enabled = true;

    void validate() const {
        if (!(bonus_b >= 0.0)) throw ConfigError("selector: bonus_b must be >= 0");
        if (!(rw > 0.0)) throw ConfigError("selector: rw must be > 0");
        if (!(sc_alpha > 0.0 && sc_alpha < 1.0))
            throw ConfigError("selector: sc_alpha must lie in (0, 1)");
        if (!(tau_select >= 0.0 && tau_select < 1.0))
            throw ConfigError("selector: tau_select must lie in [0, 1)");
        if (!(sc_init >= 0.0 && sc_init <= 1.0))
            throw ConfigError("selector: sc_init must lie in [0, 1]");
    }
};

inline double distance_error(Point predicted, Point candidate, DistanceMode mode) {
    if (mode == DistanceMode::Sum)
        return std::abs((predicted.x - candidate.x) + (predicted.y - candidate.y)) / 2.0;
    return (std::abs(predicted.x - candidate.x) + std::abs(predicted.y - candidate.y)) / 2.0;
}

/// Not clamped: a candidate close to the path may score slightly above C.
inline double reliability_score(double confidence, double de, double sc,
                                const SelectorConfig& cfg) {
    return confidence - (de - cfg.bonus_b) * sc * (1.0 - confidence) / cfg.rw;
}

class SequentialConfidence {
public:
    explicit SequentialConfidence(double initial = 0.5) : sc_(initial) {}

    double value() const { return sc_; }

    /// Running average on a successfully tracked frame with confidence C.
    double update(double confidence, const SelectorConfig& cfg) {
        const double step = cfg.sc_mode == ScMode::Binary
                                ? (confidence >= cfg.tau_conf ? 1.0 : 0.0)
                                : std::clamp(confidence, 0.0, 1.0);
        return apply(step, cfg);
    }

    /// Lost frame: the average moves toward 0.
    double record_failure(const SelectorConfig& cfg) { return apply(0.0, cfg); }

private:
    double apply(double step, const SelectorConfig& cfg) {
        sc_ = (1.0 - cfg.sc_alpha) * sc_ + cfg.sc_alpha * step;
        sc_ = std::clamp(sc_, 0.0, 1.0);
        return sc_;
    }

    double sc_;
};

inline double update_sequential_confidence(double sc, double confidence,
                                           const SelectorConfig& cfg) {
    SequentialConfidence s(sc);
    return s.update(confidence, cfg);
}

struct CandidateScore {
    double confidence = 0.0;
    double distance_error = 0.0;
    double reliability = 0.0;
};

struct Selection {
    bool tracked = false;
    /// Index of the best candidate (also reported when lost).
    std::size_t index = 0;
    BBox box;
    double rs = 0.0;
    std::vector<CandidateScore> diagnostics;
};

/// Scores every candidate and picks the highest RS; ties go to higher C, then
/// lower DE, then lower index.
inline Selection select(std::span<const Candidate> candidates, Point predicted, double sc,
                        const ImageDims& dims, const SelectorConfig& cfg) {
    if (candidates.empty()) throw Error("select: empty candidate list");
    Selection out;
    out.diagnostics.reserve(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        const auto& cand = candidates[j];
        const NormBBox n = normalize(cand.box, dims);
        const double de = distance_error(predicted, {n.cx, n.cy}, cfg.de_mode);
        const double rs = reliability_score(cand.confidence, de, sc, cfg);
        out.diagnostics.push_back({cand.confidence, de, rs});
        if (j == 0) continue;
        const auto& best = out.diagnostics[out.index];
        const bool better =
            rs > best.reliability ||
            (rs == best.reliability &&
             (cand.confidence > best.confidence ||
              (cand.confidence == best.confidence && de < best.distance_error)));
        if (better) out.index = j;
    }
    out.box = candidates[out.index].box;
    out.rs = out.diagnostics[out.index].reliability;
    out.tracked = out.rs >= cfg.tau_select;
    return out;
}

}  // namespace mttsiam
