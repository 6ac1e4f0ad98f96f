#pragma once

// Weighted fusion of per-template score maps and top-k peak extraction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mttsiam/error.hpp"
#include "mttsiam/geometry.hpp"

namespace mttsiam {

/// Row-major grid of confidences with the box decoded at each cell.
struct ScoreMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> scores;
    std::vector<BBox> boxes;

    ScoreMap() = default;
    ScoreMap(std::size_t r, std::size_t c) : rows(r), cols(c), scores(r * c, 0.0), boxes(r * c) {}

    std::size_t size() const { return rows * cols; }
    double& score(std::size_t r, std::size_t c) { return scores[r * cols + c]; }
    double score(std::size_t r, std::size_t c) const { return scores[r * cols + c]; }
    BBox& box(std::size_t r, std::size_t c) { return boxes[r * cols + c]; }
    const BBox& box(std::size_t r, std::size_t c) const { return boxes[r * cols + c]; }

    bool consistent() const { return scores.size() == rows * cols && boxes.size() == rows * cols; }
};

struct Candidate {
    BBox box;
    double confidence = 0.0;
    std::size_t row = 0;
    std::size_t col = 0;
};

/// M = sum_i W_i m_i over the score channel, summed in slot order. Each fused
/// cell takes its box from the template with the largest weighted score there
/// (lowest index on ties).
inline ScoreMap fuse(std::span<const ScoreMap> maps, std::span<const double> weights) {
    if (maps.empty()) throw ConfigError("fuse: no score maps");
    if (maps.size() != weights.size())
        throw ConfigError("fuse: " + std::to_string(maps.size()) + " maps but " +
                          std::to_string(weights.size()) + " weights");
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (std::abs(wsum - 1.0) > 1e-9) throw ConfigError("fuse: weights must sum to 1");
    const std::size_t rows = maps[0].rows;
    const std::size_t cols = maps[0].cols;
    for (const auto& m : maps) {
        if (m.rows != rows || m.cols != cols || !m.consistent())
            throw ConfigError("fuse: score maps differ in grid dimensions");
    }

    ScoreMap out(rows, cols);
    const std::size_t cells = rows * cols;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        double acc = 0.0;
        double best = -1.0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < maps.size(); ++i) {
            const double weighted = weights[i] * maps[i].scores[cell];
            acc += weighted;
            if (weighted > best) {
                best = weighted;
                best_i = i;
            }
        }
        out.scores[cell] = acc;
        out.boxes[cell] = maps[best_i].boxes[cell];
    }
    return out;
}

/// The k best cells after greedy non-maximum suppression. A cell is suppressed
/// when it lies within `radius` cells (Chebyshev distance) of an already
/// accepted one. Ties in score go to the lexicographically smaller (row, col).
inline std::vector<Candidate> top_candidates(const ScoreMap& map, std::size_t k,
                                             std::size_t radius = 2) {
    if (k == 0) throw ConfigError("top_candidates: k must be at least 1");
    std::vector<std::size_t> order(map.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return map.scores[a] > map.scores[b];
    });

    std::vector<Candidate> out;
    out.reserve(k);
    const auto r = static_cast<long>(radius);
    for (std::size_t cell : order) {
        if (out.size() == k) break;
        const auto row = static_cast<long>(cell / map.cols);
        const auto col = static_cast<long>(cell % map.cols);
        const bool suppressed = std::any_of(out.begin(), out.end(), [&](const Candidate& c) {
            return std::labs(static_cast<long>(c.row) - row) <= r &&
                   std::labs(static_cast<long>(c.col) - col) <= r;
        });
        if (suppressed) continue;
        out.push_back({map.boxes[cell], map.scores[cell], static_cast<std::size_t>(row),
                       static_cast<std::size_t>(col)});
    }
    return out;
}

}  // namespace mttsiam
