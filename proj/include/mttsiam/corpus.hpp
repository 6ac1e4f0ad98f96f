#pragma once

// Synthetic motion corpora for training and validating CombiNet, plus the
// held-out error measures used to judge a trained model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mttsiam/combinet.hpp"
#include "mttsiam/error.hpp"
#include "mttsiam/geometry.hpp"

namespace mttsiam {

struct CorpusConfig {
    std::size_t sequences = 500;
    /// 104 frames give 100 five-frame windows per sequence.
    std::size_t frames = 104;
    ImageDims arena{640, 480};
    /// Speed range in px/frame.
    double min_speed = 0.5;
    double max_speed = 4.0;
    double min_size = 24.0;
    double max_size = 96.0;
    /// Standard deviation of the annotation noise on box position, px.
    double jitter = 1.0;
    std::uint64_t seed = 7;

    void validate() const {
        if (sequences == 0) throw ConfigError("corpus: sequences must be >= 1");
        if (frames < 5) throw ConfigError("corpus: frames must be >= 5");
        if (!arena.valid()) throw ConfigError("corpus: arena must be positive");
        if (!(min_speed >= 0.0 && max_speed >= min_speed))
            throw ConfigError("corpus: speed range must satisfy 0 <= min <= max");
        if (!(min_size > 0.0 && max_size >= min_size))
            throw ConfigError("corpus: size range must satisfy 0 < min <= max");
        if (!(jitter >= 0.0)) throw ConfigError("corpus: jitter must be >= 0");
    }
};

/// Constant-velocity tracks that stay inside the arena, with Gaussian
/// annotation jitter on the box position.
inline std::vector<AnnotatedTrack> constant_velocity_corpus(const CorpusConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr double kTwoPi = 6.283185307179586;
    const double W = cfg.arena.width;
    const double H = cfg.arena.height;
    const double steps = static_cast<double>(cfg.frames - 1);

    std::vector<AnnotatedTrack> out;
    out.reserve(cfg.sequences);
    for (std::size_t s = 0; s < cfg.sequences; ++s) {
        const double size = std::min({cfg.min_size + uni(rng) * (cfg.max_size - cfg.min_size), W / 2.0, H / 2.0});
        const double heading = kTwoPi * uni(rng);
        double speed = cfg.min_speed + uni(rng) * (cfg.max_speed - cfg.min_speed);
        // Slow down until the whole path fits.
        const double room_x = W - size;
        const double room_y = H - size;
        const double need = std::max(std::abs(std::cos(heading)) * steps / room_x,
                                     std::abs(std::sin(heading)) * steps / room_y);
        if (need > 0.0) speed = std::min(speed, 0.95 / need);
        const double vx = speed * std::cos(heading);
        const double vy = speed * std::sin(heading);
        const double lo_x = std::max(0.0, -vx * steps);
        const double hi_x = std::min(room_x, room_x - vx * steps);
        const double lo_y = std::max(0.0, -vy * steps);
        const double hi_y = std::min(room_y, room_y - vy * steps);
        const double x0 = lo_x + uni(rng) * (hi_x - lo_x);
        const double y0 = lo_y + uni(rng) * (hi_y - lo_y);

        AnnotatedTrack track;
        track.dims = cfg.arena;
        track.boxes.reserve(cfg.frames);
        for (std::size_t t = 0; t < cfg.frames; ++t) {
            const double tt = static_cast<double>(t);
            const BBox b{x0 + vx * tt + cfg.jitter * gauss(rng), y0 + vy * tt + cfg.jitter * gauss(rng), size,
                         size};
            track.boxes.push_back(b);
        }
        out.push_back(std::move(track));
    }
    return out;
}

/// Mean Euclidean distance (normalized units) between predicted and target
/// centers. A null model uses linear extrapolation from the last two boxes
/// of each window.
inline double mean_center_error(const CombiNetModel* model, std::span<const TrainSample> samples) {
    if (samples.empty()) throw Error("mean_center_error: no samples");
    double sum = 0.0;
    for (const auto& s : samples) {
        Point p;
        if (model) {
            p = forward(*model, s.input);
        } else {
            const auto& a = s.input.boxes[kWindowFrames - 2];
            const auto& b = s.input.boxes[kWindowFrames - 1];
            p = {2.0 * b.cx - a.cx, 2.0 * b.cy - a.cy};
        }
        sum += std::hypot(p.x - s.target.cx, p.y - s.target.cy);
    }
    return sum / static_cast<double>(samples.size());
}

}  // namespace mttsiam
