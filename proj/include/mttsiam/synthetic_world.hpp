#pragma once

// Deterministic tracking world: one target and optional distractors moving in
// an arena, each carrying a 16-d unit appearance vector. The target's
// appearance drifts; distractors stay at a fixed cosine similarity to it.
// SyntheticScorer turns a template vector into a 32x32 score map by placing a
// Gaussian bump of height cos(template, entity) on every visible entity.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mttsiam/error.hpp"
#include "mttsiam/geometry.hpp"
#include "mttsiam/score_fusion.hpp"

namespace mttsiam {

inline constexpr std::size_t kAppearanceDim = 16;
using Appearance = std::array<double, kAppearanceDim>;

enum class MotionKind { ConstantVelocity, SineWeave, RandomWalk };

struct Occlusion {
    std::size_t start = 0;
    std::size_t length = 0;
};

struct ScorerParams {
    std::size_t grid = 32;
    /// Bump standard deviation in grid cells.
    double bump_sigma = 1.5;
    /// Amplitude of the uniform background noise added to every cell.
    double noise = 0.05;
    /// Size of the box decoded on cells far from every entity.
    double default_box = 40.0;
    std::uint64_t seed = 0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    std::size_t frames = 200;
    ImageDims arena{640, 480};
    MotionKind motion = MotionKind::ConstantVelocity;
    /// Target speed in px/frame (constant velocity and sine weave drift speed).
    double speed = 2.0;
    double sine_amplitude = 60.0;
    double sine_period = 80.0;
    /// Per-frame velocity perturbation for the random walk, px/frame.
    double walk_sigma = 0.35;
    double target_w = 48.0;
    double target_h = 48.0;
    std::size_t distractors = 0;
    double distractor_similarity = 0.85;
    double distractor_speed = 2.0;
    /// Magnitude of the per-frame appearance perturbation.
    double drift_rate = 0.0;
    /// Fraction of the perturbation aligned with a fixed per-scenario direction.
    double drift_persistence = 0.4;
    std::vector<Occlusion> occlusions;
    ScorerParams scorer;

    void validate() const {
        if (frames < 5) throw ConfigError("scenario: frames must be >= 5");
        if (!arena.valid()) throw ConfigError("scenario: arena must be positive");
        if (!(distractor_similarity >= 0.0 && distractor_similarity <= 1.0))
            throw ConfigError("scenario: similarity must lie in [0, 1]");
        if (!(target_w > 0.0 && target_h > 0.0)) throw ConfigError("scenario: target size must be positive");
        if (!(drift_rate >= 0.0)) throw ConfigError("scenario: drift rate must be >= 0");
        if (!(drift_persistence >= 0.0 && drift_persistence <= 1.0))
            throw ConfigError("scenario: drift persistence must lie in [0, 1]");
        if (scorer.grid == 0 || !(scorer.bump_sigma > 0.0))
            throw ConfigError("scenario: scorer grid and sigma must be positive");
    }
};

struct Entity {
    int id = 0;
    BBox box;
    Appearance appearance{};
};

struct WorldFrame {
    std::size_t index = 0;
    ImageDims dims;
    /// Visible entities; the target is absent while occluded.
    std::vector<Entity> entities;
    int target_id = 0;
    bool target_visible = true;
    /// Ground-truth target box, kept during occlusion.
    BBox target_box;
    /// Target center before clamping to the arena.
    Point target_center_raw;
};

namespace detail {

inline double dot(const Appearance& a, const Appearance& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < kAppearanceDim; ++i) s += a[i] * b[i];
    return s;
}

inline Appearance normalized(Appearance v) {
    const double n = std::sqrt(dot(v, v));
    if (n > 0.0)
        for (double& x : v) x /= n;
    return v;
}

inline Appearance gaussian_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Appearance v{};
    for (double& x : v) x = g(rng);
    return v;
}

/// Unit vector orthogonal to `ref` (a unit vector), from `raw`.
inline Appearance orthogonal_to(const Appearance& ref, Appearance raw) {
    const double d = dot(raw, ref);
    for (std::size_t i = 0; i < kAppearanceDim; ++i) raw[i] -= d * ref[i];
    return normalized(raw);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_appearance(const Appearance& a) {
    std::uint64_t h = 0x51ed270b27fd1f3bULL;
    for (double v : a) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = splitmix64(h ^ bits);
    }
    return h;
}

inline double unit_from_hash(std::uint64_t h) {
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace detail

inline double cosine_similarity(const Appearance& a, const Appearance& b) {
    const double na = std::sqrt(detail::dot(a, a));
    const double nb = std::sqrt(detail::dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return detail::dot(a, b) / (na * nb);
}

inline bool occluded_at(const ScenarioConfig& cfg, std::size_t frame) {
    return std::any_of(cfg.occlusions.begin(), cfg.occlusions.end(), [&](const Occlusion& o) {
        return frame >= o.start && frame < o.start + o.length;
    });
}

namespace detail {

/// Appearance, distractors and occlusion on top of a target path. Shared by
/// generate and generate_along.
inline std::vector<WorldFrame> populate(const ScenarioConfig& cfg, const ImageDims& arena,
                                        const std::vector<Point>& centers,
                                        const std::vector<Point>& sizes,
                                        const std::vector<bool>& visible, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double W = arena.width;
    const double H = arena.height;
    constexpr double kTwoPi = 6.283185307179586;

    // Appearance: initial target vector, fixed drift direction, distractor offsets.
    Appearance target = detail::normalized(detail::gaussian_vector(rng));
    const Appearance drift_dir = detail::orthogonal_to(target, detail::gaussian_vector(rng));

    struct Mover {
        Point p;
        Point v;
        Appearance offset;
    };
    std::vector<Mover> movers;
    for (std::size_t k = 0; k < cfg.distractors; ++k) {
        Mover m;
        // Keep distractors away from the target's first position.
        for (int attempt = 0; attempt < 100; ++attempt) {
            m.p = {cfg.target_w + uni(rng) * (W - 2.0 * cfg.target_w),
                   cfg.target_h + uni(rng) * (H - 2.0 * cfg.target_h)};
            if (std::hypot(m.p.x - centers[0].x, m.p.y - centers[0].y) > 150.0) break;
        }
        const double a = kTwoPi * uni(rng);
        m.v = {cfg.distractor_speed * std::cos(a), cfg.distractor_speed * std::sin(a)};
        m.offset = detail::gaussian_vector(rng);
        movers.push_back(m);
    }

    std::vector<WorldFrame> world;
    world.reserve(centers.size());
    const double s = cfg.distractor_similarity;
    const double s_perp = std::sqrt(std::max(0.0, 1.0 - s * s));
    for (std::size_t t = 0; t < centers.size(); ++t) {
        if (t > 0 && cfg.drift_rate > 0.0) {
            const Appearance noise = detail::normalized(detail::gaussian_vector(rng));
            const double p = cfg.drift_persistence;
            const double q = std::sqrt(1.0 - p * p);
            for (std::size_t i = 0; i < kAppearanceDim; ++i)
                target[i] += cfg.drift_rate * (p * drift_dir[i] + q * noise[i]);
            target = detail::normalized(target);
        }

        WorldFrame f;
        f.index = t;
        f.dims = arena;
        f.target_id = 0;
        f.target_center_raw = centers[t];
        f.target_box = clamp_to_image({centers[t].x - sizes[t].x / 2.0, centers[t].y - sizes[t].y / 2.0,
                                       sizes[t].x, sizes[t].y},
                                      arena);
        f.target_visible = visible[t];
        if (f.target_visible) f.entities.push_back({0, f.target_box, target});

        for (std::size_t k = 0; k < movers.size(); ++k) {
            auto& m = movers[k];
            if (t > 0) {
                m.p.x += m.v.x;
                m.p.y += m.v.y;
                const double hx = cfg.target_w / 2.0;
                const double hy = cfg.target_h / 2.0;
                if (m.p.x < hx || m.p.x > W - hx) {
                    m.v.x = -m.v.x;
                    m.p.x = std::clamp(m.p.x, hx, W - hx);
                }
                if (m.p.y < hy || m.p.y > H - hy) {
                    m.v.y = -m.v.y;
                    m.p.y = std::clamp(m.p.y, hy, H - hy);
                }
            }
            const Appearance perp = detail::orthogonal_to(target, m.offset);
            Appearance app{};
            for (std::size_t i = 0; i < kAppearanceDim; ++i) app[i] = s * target[i] + s_perp * perp[i];
            const BBox box = clamp_to_image(
                {m.p.x - cfg.target_w / 2.0, m.p.y - cfg.target_h / 2.0, cfg.target_w, cfg.target_h},
                arena);
            f.entities.push_back({static_cast<int>(k) + 1, box, detail::normalized(app)});
        }
        world.push_back(std::move(f));
    }
    return world;
}

}  // namespace detail

/// Generates the scenario's frames. Identical configs give identical worlds.
inline std::vector<WorldFrame> generate(const ScenarioConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double W = cfg.arena.width;
    const double H = cfg.arena.height;
    const double frames = static_cast<double>(cfg.frames);
    constexpr double kTwoPi = 6.283185307179586;

    // Target path. The constant-velocity start is placed so the whole path
    // is centered in the arena.
    const double heading = kTwoPi * uni(rng);
    const double vx = cfg.speed * std::cos(heading);
    const double vy = cfg.speed * std::sin(heading);
    const double span_x = std::min(std::abs(vx) * frames, W - cfg.target_w - 20.0);
    const double span_y = std::min(std::abs(vy) * frames, H - cfg.target_h - 20.0);
    Point start{W / 2.0 - (vx >= 0 ? 1.0 : -1.0) * span_x / 2.0,
                H / 2.0 - (vy >= 0 ? 1.0 : -1.0) * span_y / 2.0};
    const double phase = kTwoPi * uni(rng);

    std::vector<Point> centers(cfg.frames);
    switch (cfg.motion) {
        case MotionKind::ConstantVelocity:
            for (std::size_t t = 0; t < cfg.frames; ++t)
                centers[t] = {start.x + vx * static_cast<double>(t), start.y + vy * static_cast<double>(t)};
            break;
        case MotionKind::SineWeave: {
            // Weave perpendicular to the heading.
            const double px = -std::sin(heading);
            const double py = std::cos(heading);
            for (std::size_t t = 0; t < cfg.frames; ++t) {
                const double tt = static_cast<double>(t);
                const double off = cfg.sine_amplitude * std::sin(kTwoPi * tt / cfg.sine_period + phase);
                centers[t] = {start.x + vx * tt + px * off, start.y + vy * tt + py * off};
            }
            break;
        }
        case MotionKind::RandomWalk: {
            Point p{W / 2.0, H / 2.0};
            Point v{vx, vy};
            const double margin_x = cfg.target_w / 2.0 + 10.0;
            const double margin_y = cfg.target_h / 2.0 + 10.0;
            for (std::size_t t = 0; t < cfg.frames; ++t) {
                centers[t] = p;
                v.x = 0.95 * v.x + cfg.walk_sigma * gauss(rng);
                v.y = 0.95 * v.y + cfg.walk_sigma * gauss(rng);
                p.x += v.x;
                p.y += v.y;
                if (p.x < margin_x || p.x > W - margin_x) {
                    v.x = -v.x;
                    p.x = std::clamp(p.x, margin_x, W - margin_x);
                }
                if (p.y < margin_y || p.y > H - margin_y) {
                    v.y = -v.y;
                    p.y = std::clamp(p.y, margin_y, H - margin_y);
                }
            }
            break;
        }
    }

    std::vector<Point> sizes(cfg.frames, Point{cfg.target_w, cfg.target_h});
    std::vector<bool> visible(cfg.frames);
    for (std::size_t t = 0; t < cfg.frames; ++t) visible[t] = !occluded_at(cfg, t);
    return detail::populate(cfg, cfg.arena, centers, sizes, visible, rng);
}

/// World whose target follows an annotated path (nullopt frames hide the
/// target at its last known box). Appearance, drift, distractors and scorer
/// settings come from `cfg`; its motion, frame count, arena and occlusion
/// fields are ignored.
inline std::vector<WorldFrame> generate_along(const ScenarioConfig& cfg, const ImageDims& dims,
                                              std::span<const std::optional<BBox>> path) {
    if (!dims.valid()) throw ConfigError("scenario: image size must be positive");
    const auto first = std::find_if(path.begin(), path.end(), [](const auto& b) { return b.has_value(); });
    if (first == path.end()) throw ConfigError("scenario: annotated path has no visible frame");
    std::mt19937_64 rng(cfg.seed);
    std::vector<Point> centers(path.size());
    std::vector<Point> sizes(path.size());
    std::vector<bool> visible(path.size());
    BBox last = **first;
    for (std::size_t t = 0; t < path.size(); ++t) {
        if (path[t]) last = *path[t];
        visible[t] = path[t].has_value();
        centers[t] = last.center();
        sizes[t] = {last.w, last.h};
    }
    return detail::populate(cfg, dims, centers, sizes, visible, rng);
}

/// Template of the synthetic scorer: the captured appearance plus the frame it
/// was captured on. Templates taken on different frames see independent noise
/// fields, the way real backbone responses differ between crops.
struct SyntheticTemplate {
    Appearance appearance{};
    std::uint64_t captured = 0;

    friend bool operator==(const SyntheticTemplate&, const SyntheticTemplate&) = default;
};

/// Appearance scorer over a synthetic world. Stateless and deterministic:
/// the noise field is a hash of (seed, frame, cell, template).
class SyntheticScorer {
public:
    using Template = SyntheticTemplate;
    using Frame = WorldFrame;

    explicit SyntheticScorer(ScorerParams params = {}) : params_(params) {}

    const ScorerParams& params() const { return params_; }

    ImageDims dims(const WorldFrame& frame) const { return frame.dims; }

    /// Appearance of the entity best overlapping `box` (zero vector below IoU 0.3).
    SyntheticTemplate make_template(const WorldFrame& frame, const BBox& box) const {
        double best = 0.0;
        const Entity* pick = nullptr;
        for (const auto& e : frame.entities) {
            const double o = iou(e.box, box);
            if (o > best) {
                best = o;
                pick = &e;
            }
        }
        SyntheticTemplate t;
        t.captured = frame.index;
        if (pick && best >= 0.3) t.appearance = pick->appearance;
        return t;
    }

    ScoreMap score(const WorldFrame& frame, const SyntheticTemplate& tmpl) const {
        const std::size_t G = params_.grid;
        const double cell_w = static_cast<double>(frame.dims.width) / static_cast<double>(G);
        const double cell_h = static_cast<double>(frame.dims.height) / static_cast<double>(G);
        const double sigma = params_.bump_sigma;
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        const auto reach = static_cast<long>(std::ceil(4.0 * sigma));
        const double decode_radius2 = 9.0 * sigma * sigma;

        ScoreMap map(G, G);
        // Nearest-entity distance per cell for box decoding.
        std::vector<double> nearest(G * G, decode_radius2);
        std::vector<int> owner(G * G, -1);

        for (std::size_t e = 0; e < frame.entities.size(); ++e) {
            const auto& ent = frame.entities[e];
            const Point c = ent.box.center();
            // The bump peaks on the cell holding the entity center, so the peak
            // equals the similarity exactly.
            const long col0 = std::clamp(static_cast<long>(std::floor(c.x / cell_w)), 0L,
                                         static_cast<long>(G) - 1);
            const long row0 = std::clamp(static_cast<long>(std::floor(c.y / cell_h)), 0L,
                                         static_cast<long>(G) - 1);
            const double height = std::clamp(cosine_similarity(tmpl.appearance, ent.appearance), 0.0, 1.0);
            for (long r = row0 - reach; r <= row0 + reach; ++r) {
                if (r < 0 || r >= static_cast<long>(G)) continue;
                for (long cc = col0 - reach; cc <= col0 + reach; ++cc) {
                    if (cc < 0 || cc >= static_cast<long>(G)) continue;
                    const auto dx = static_cast<double>(cc - col0);
                    const auto dy = static_cast<double>(r - row0);
                    const double d2 = dx * dx + dy * dy;
                    const std::size_t cell = static_cast<std::size_t>(r) * G + static_cast<std::size_t>(cc);
                    map.scores[cell] = std::max(map.scores[cell], height * std::exp(-d2 * inv2s2));
                    if (d2 < nearest[cell]) {
                        nearest[cell] = d2;
                        owner[cell] = static_cast<int>(e);
                    }
                }
            }
        }

        const std::uint64_t base = detail::splitmix64(params_.seed ^ detail::splitmix64(frame.index) ^
                                                      detail::hash_appearance(tmpl.appearance) ^
                                                      detail::splitmix64(~tmpl.captured));
        for (std::size_t r = 0; r < G; ++r)
            for (std::size_t c = 0; c < G; ++c) {
                const std::size_t cell = r * G + c;
                const double u = detail::unit_from_hash(detail::splitmix64(base + cell));
                map.scores[cell] = std::clamp(map.scores[cell] + params_.noise * (2.0 * u - 1.0), 0.0, 1.0);
                if (owner[cell] >= 0) {
                    map.boxes[cell] = frame.entities[static_cast<std::size_t>(owner[cell])].box;
                } else {
                    const double cx = (static_cast<double>(c) + 0.5) * cell_w;
                    const double cy = (static_cast<double>(r) + 0.5) * cell_h;
                    const double d = params_.default_box;
                    map.boxes[cell] = clamp_to_image({cx - d / 2.0, cy - d / 2.0, d, d}, frame.dims);
                }
            }
        return map;
    }

private:
    ScorerParams params_;
};

inline SyntheticScorer mock_scorer(const std::vector<WorldFrame>& world, ScorerParams params = {}) {
    if (world.empty()) throw Error("mock_scorer: empty world");
    return SyntheticScorer(params);
}

/// The frozen benchmark: three motion laws crossed with four challenge kinds.
/// Seeds and parameters are part of the contract; do not change them.
inline std::vector<ScenarioConfig> scenario_suite() {
    struct Motion {
        const char* tag;
        MotionKind kind;
    };
    const Motion motions[] = {{"cv", MotionKind::ConstantVelocity},
                              {"sine", MotionKind::SineWeave},
                              {"walk", MotionKind::RandomWalk}};
    const char* kinds[] = {"clean", "distractors", "drift_distractors", "occlusion"};
    std::vector<ScenarioConfig> suite;
    std::uint64_t seed = 1001;
    for (const auto& m : motions) {
        for (const char* kind : kinds) {
            ScenarioConfig c;
            c.name = std::string(m.tag) + "_" + kind;
            c.seed = seed++;
            c.motion = m.kind;
            c.scorer.seed = c.seed * 7919;
            const std::string k = kind;
            if (k == "distractors") {
                c.distractors = 3;
                c.distractor_similarity = 0.95;
            } else if (k == "drift_distractors") {
                c.distractors = 3;
                c.distractor_similarity = 0.85;
                c.drift_rate = 0.02;
            } else if (k == "occlusion") {
                c.drift_rate = 0.01;
                c.occlusions = {{60, 15}, {140, 12}};
            }
            suite.push_back(std::move(c));
        }
    }
    return suite;
}

}  // namespace mttsiam
