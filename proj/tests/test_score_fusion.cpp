#include <gtest/gtest.h>

#include <random>

#include "mttsiam/score_fusion.hpp"

using namespace mttsiam;

namespace {

ScoreMap grid(std::size_t r, std::size_t c, std::initializer_list<double> values) {
    ScoreMap m(r, c);
    std::size_t i = 0;
    for (double v : values) m.scores[i++] = v;
    for (std::size_t k = 0; k < m.size(); ++k)
        m.boxes[k] = {double(k % c) * 10, double(k / c) * 10, 10, 10};
    return m;
}

ScoreMap random_map(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScoreMap m(r, c);
    for (auto& s : m.scores) s = u(rng);
    for (auto& b : m.boxes) b = {u(rng) * 100, u(rng) * 100, 1 + u(rng) * 20, 1 + u(rng) * 20};
    return m;
}

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> w(n);
    double sum = 0;
    for (auto& v : w) sum += (v = u(rng));
    for (auto& v : w) v /= sum;
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) rest -= w[i];
    w.back() = rest;
    return w;
}

}  // namespace

TEST(Fuse, HandExample) {
    const std::vector<ScoreMap> maps{grid(2, 2, {1, 0, 0, 0}), grid(2, 2, {0, 1, 0, 0})};
    const std::vector<double> w{0.7, 0.3};
    const ScoreMap f = fuse(maps, w);
    EXPECT_DOUBLE_EQ(f.score(0, 0), 0.7);
    EXPECT_DOUBLE_EQ(f.score(0, 1), 0.3);
    EXPECT_DOUBLE_EQ(f.score(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(f.score(1, 1), 0.0);
}

TEST(Fuse, SingleMapIsBitwiseIdentity) {
    std::mt19937_64 rng(1);
    const std::vector<ScoreMap> maps{random_map(rng, 7, 5)};
    const std::vector<double> w{1.0};
    const ScoreMap f = fuse(maps, w);
    EXPECT_EQ(f.scores, maps[0].scores);
    EXPECT_EQ(f.boxes, maps[0].boxes);
}

TEST(Fuse, IdenticalMapsAreAFixedPoint) {
    std::mt19937_64 rng(2);
    const ScoreMap m = random_map(rng, 4, 4);
    const std::vector<ScoreMap> maps(3, m);
    const std::vector<double> w{0.5, 0.25, 0.25};
    const ScoreMap f = fuse(maps, w);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(f.scores[i], m.scores[i], 1e-15);
}

TEST(Fuse, BoxComesFromLargestWeightedScore) {
    std::vector<ScoreMap> maps{grid(1, 1, {0.4}), grid(1, 1, {0.9})};
    maps[1].boxes[0] = {1, 2, 3, 4};
    const std::vector<double> w{0.6, 0.4};
    EXPECT_EQ(fuse(maps, w).boxes[0], (BBox{1, 2, 3, 4}));
    const std::vector<double> w2{0.8, 0.2};
    EXPECT_EQ(fuse(maps, w2).boxes[0], maps[0].boxes[0]);
}

TEST(Fuse, Errors) {
    const std::vector<ScoreMap> maps{grid(2, 2, {}), grid(2, 3, {})};
    const std::vector<double> w{0.5, 0.5};
    EXPECT_THROW(fuse(maps, w), ConfigError);
    const std::vector<ScoreMap> same{grid(2, 2, {}), grid(2, 2, {})};
    const std::vector<double> bad{0.5, 0.4};
    EXPECT_THROW(fuse(same, bad), ConfigError);
    const std::vector<double> short_w{1.0};
    EXPECT_THROW(fuse(same, short_w), ConfigError);
    EXPECT_THROW(fuse(std::span<const ScoreMap>{}, std::span<const double>{}), ConfigError);
}

TEST(Fuse, MatchesDoubleLoopOracle) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng() % 10;
        std::vector<ScoreMap> maps;
        for (std::size_t i = 0; i < n; ++i) maps.push_back(random_map(rng, 8, 6));
        const auto w = random_weights(rng, n);
        const ScoreMap f = fuse(maps, w);
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 6; ++c) {
                double acc = 0;
                for (std::size_t i = 0; i < n; ++i) acc += w[i] * maps[i].score(r, c);
                EXPECT_NEAR(f.score(r, c), acc, 1e-12);
            }
    }
}

TEST(Fuse, LinearInScale) {
    std::mt19937_64 rng(4);
    std::vector<ScoreMap> maps{random_map(rng, 5, 5), random_map(rng, 5, 5)};
    const std::vector<double> w{0.3, 0.7};
    const ScoreMap base = fuse(maps, w);
    for (auto& m : maps)
        for (auto& s : m.scores) s *= 0.5;
    const ScoreMap scaled = fuse(maps, w);
    for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(scaled.scores[i], 0.5 * base.scores[i], 1e-15);
}

TEST(Fuse, PermutationConsistent) {
    std::mt19937_64 rng(5);
    std::vector<ScoreMap> maps{random_map(rng, 5, 5), random_map(rng, 5, 5), random_map(rng, 5, 5)};
    const std::vector<double> w{0.2, 0.3, 0.5};
    const ScoreMap a = fuse(maps, w);
    std::vector<ScoreMap> perm{maps[2], maps[0], maps[1]};
    const std::vector<double> pw{0.5, 0.2, 0.3};
    const ScoreMap b = fuse(perm, pw);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(a.scores[i], b.scores[i], 1e-15);
        EXPECT_EQ(a.boxes[i], b.boxes[i]);
    }
}

TEST(TopCandidates, SinglePeak) {
    ScoreMap m(10, 10);
    m.score(4, 6) = 0.9;
    m.score(4, 7) = 0.5;
    m.score(9, 9) = 0.3;
    const auto c = top_candidates(m, 10);
    ASSERT_FALSE(c.empty());
    EXPECT_EQ(c[0].row, 4u);
    EXPECT_EQ(c[0].col, 6u);
    EXPECT_EQ(c[1].row, 9u);
    EXPECT_EQ(c[1].col, 9u);
    EXPECT_LE(c.size(), 10u);
}

TEST(TopCandidates, UniformMapTakesLexicographicCells) {
    ScoreMap m(10, 10);
    for (auto& s : m.scores) s = 0.5;
    const auto c = top_candidates(m, 3, 0);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0].col, 0u);
    EXPECT_EQ(c[1].col, 1u);
    EXPECT_EQ(c[2].col, 2u);
    for (const auto& x : c) EXPECT_EQ(x.row, 0u);
}

TEST(TopCandidates, TwoSeparatedPeaksBothSurvive) {
    ScoreMap m(10, 10);
    m.score(1, 1) = 0.8;
    m.score(1, 5) = 0.8;
    m.score(1, 2) = 0.7;
    const auto c = top_candidates(m, 2);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].col, 1u);
    EXPECT_EQ(c[1].col, 5u);
}

TEST(TopCandidates, RejectsZeroK) { EXPECT_THROW(top_candidates(ScoreMap(2, 2), 0), ConfigError); }

TEST(TopCandidates, SortedSuppressedAndLedByArgmax) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 200; ++t) {
        const ScoreMap m = random_map(rng, 16, 16);
        const std::size_t radius = rng() % 4;
        const auto c = top_candidates(m, 10, radius);
        const auto best = std::max_element(m.scores.begin(), m.scores.end());
        EXPECT_EQ(c[0].confidence, *best);
        EXPECT_EQ(c[0].row * 16 + c[0].col, static_cast<std::size_t>(best - m.scores.begin()));
        for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i - 1].confidence, c[i].confidence);
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j) {
                const long dr = std::labs(long(c[i].row) - long(c[j].row));
                const long dc = std::labs(long(c[i].col) - long(c[j].col));
                EXPECT_GT(std::max(dr, dc), long(radius));
            }
    }
}
