#include <gtest/gtest.h>

#include <random>

#include "mttsiam/template_bag.hpp"

using namespace mttsiam;

namespace {

BagConfig explicit_six() {
    BagConfig c = BagConfig::defaults(6);
    c.slot_weights = {4, 2, 1.5, 1.2, 1.0};
    c.above_mean_slots = 2;
    return c;
}

BagConfig constant_bag(std::vector<double> tau) {
    BagConfig c = BagConfig::defaults(tau.size() + 1);
    c.mode = ThresholdMode::Constant;
    c.constant_thresholds = std::move(tau);
    return c;
}

// Interval scan written directly from the update rule.
std::optional<std::size_t> scan(const std::vector<double>& tau, double c, double tau_min) {
    if (c < tau_min) return std::nullopt;
    std::optional<std::size_t> hit;
    int hits = 0;
    for (std::size_t i = 2; i <= tau.size(); ++i) {
        const double lo = tau[i - 1];
        const double hi = tau[i - 2];
        if (lo >= 1.0) continue;
        if (lo <= c && (c < hi || hi >= 1.0)) {
            hit = i;
            ++hits;
        }
    }
    EXPECT_LE(hits, 1);
    if (!hit && tau.size() >= 2 && c < tau.back()) hit = tau.size();
    return hit;
}

}  // namespace

TEST(Thresholds, HandEvaluatedExample) {
    const auto t = compute_thresholds(explicit_six(), 0.8);
    const std::vector<double> want{1, 0.95, 0.90, 0.80, 0.75, 0.70};
    ASSERT_EQ(t.tau.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.tau[i], want[i], 1e-12) << i;
    EXPECT_FALSE(t.degenerate);
}

TEST(Thresholds, CbarOneCollapsesAboveMeanGroup) {
    const auto t = compute_thresholds(explicit_six(), 1.0);
    EXPECT_TRUE(t.degenerate);
    EXPECT_EQ(t.tau[1], 1.0);
    EXPECT_EQ(t.tau[2], 1.0);
    EXPECT_LT(t.tau[3], 1.0);
}

TEST(Thresholds, CbarAtTauMinIsAnError) {
    try {
        compute_thresholds(explicit_six(), 0.5);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("tau_"), std::string::npos);
    }
}

TEST(Thresholds, DefaultsStrictlyDecreasingOverCbarRange) {
    for (std::size_t n : {2u, 3u, 6u, 10u}) {
        const BagConfig c = BagConfig::defaults(n);
        for (int k = 1; k < 1000; ++k) {
            const double cbar = c.tau_min + 0.05 + (1.0 - c.tau_min - 0.05) * k / 1000.0;
            if (cbar >= 1.0) break;
            const auto t = compute_thresholds(c, cbar);
            for (std::size_t i = 1; i < t.tau.size(); ++i) {
                EXPECT_LT(t.tau[i], t.tau[i - 1]) << "n=" << n << " cbar=" << cbar;
                EXPECT_GE(t.tau[i], c.tau_min);
            }
        }
    }
}

TEST(Thresholds, ConstantModeReturnsListUnchanged) {
    const auto t = compute_thresholds(constant_bag({0.9, 0.8}), 0.7);
    EXPECT_EQ(t.tau, (std::vector<double>{1.0, 0.9, 0.8}));
}

TEST(BagConfig, Validation) {
    EXPECT_NO_THROW(BagConfig::defaults(1).validate());
    BagConfig c = BagConfig::defaults(6);
    c.fusion_weights[0] += 0.01;
    EXPECT_THROW(c.validate(), ConfigError);
    c = BagConfig::defaults(6);
    c.tau_min = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(constant_bag({0.8, 0.9}).validate(), ConfigError);
    EXPECT_THROW(constant_bag({0.9, 0.4}).validate(), ConfigError);
    c = BagConfig::defaults(6);
    c.slot_weights.pop_back();
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Bag, InitCopiesFirstTemplate) {
    TemplateBag<int> bag(BagConfig::defaults(6), 42);
    ASSERT_EQ(bag.size(), 6u);
    for (const auto& s : bag.slots()) EXPECT_EQ(s.tmpl, 42);
    EXPECT_EQ(bag.slots()[0].tau, 1.0);
    EXPECT_EQ(bag.slots()[0].group, SlotGroup::Fixed);
    EXPECT_EQ(bag.running_confidence(), 1.0);
}

TEST(Bag, SingleSlotNeverUpdates) {
    TemplateBag<int> bag(BagConfig::defaults(1), 1);
    EXPECT_EQ(bag.size(), 1u);
    EXPECT_FALSE(bag.try_update(0.99, 2, 1));
    EXPECT_EQ(bag.slots()[0].tmpl, 1);
}

TEST(Bag, TenSlotsStrictlyDecreasing) {
    TemplateBag<int> bag(BagConfig::defaults(10), 0);
    bag.set_running_confidence(0.8);
    const auto tau = bag.recompute_thresholds();
    ASSERT_EQ(tau.size(), 10u);
    for (std::size_t i = 1; i < tau.size(); ++i) EXPECT_LT(tau[i], tau[i - 1]);
}

TEST(Bag, UpdateExamplesAgainstFixedThresholds) {
    const auto cfg = constant_bag({0.95, 0.90, 0.80, 0.75, 0.70});
    TemplateBag<int> bag(cfg, 0);
    EXPECT_EQ(bag.try_update(0.92, 1, 1), std::optional<std::size_t>(3));
    EXPECT_EQ(bag.try_update(0.99, 2, 2), std::optional<std::size_t>(2));
    EXPECT_EQ(bag.try_update(1.0, 3, 3), std::optional<std::size_t>(2));
    const double before = bag.running_confidence();
    EXPECT_FALSE(bag.try_update(0.3, 4, 4));
    EXPECT_EQ(bag.running_confidence(), before);
    EXPECT_EQ(bag.slots()[2].tmpl, 1);
    EXPECT_EQ(bag.slots()[2].last_update_frame, std::optional<std::size_t>(1));
}

TEST(Bag, ConfidenceBetweenTauMinAndLastThresholdGoesToLastSlot) {
    TemplateBag<int> bag(constant_bag({0.9, 0.8}), 0);
    EXPECT_EQ(bag.try_update(0.6, 7, 1), std::optional<std::size_t>(3));
}

TEST(Bag, RunningConfidenceEma) {
    TemplateBag<int> bag(BagConfig::defaults(6), 0);
    bag.set_running_confidence(0.8);
    EXPECT_NEAR(bag.update_running_confidence(1.0), 0.81, 1e-15);
    EXPECT_NEAR(bag.update_running_confidence(0.81), 0.81, 1e-15);
    const double before = bag.running_confidence();
    EXPECT_EQ(bag.update_running_confidence(0.2), before);
}

TEST(Bag, CumulativeMeanCountsSeed) {
    BagConfig c = BagConfig::defaults(6);
    c.average = AverageMode::CumulativeMean;
    TemplateBag<int> bag(c, 0);
    EXPECT_NEAR(bag.update_running_confidence(0.8), 0.9, 1e-15);
    EXPECT_NEAR(bag.update_running_confidence(0.6), 0.8, 1e-15);
}

TEST(Bag, BruteForceIntervalScan) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 2 + rng() % 9;
        const double tau_min = 0.3 + 0.4 * u(rng);
        std::vector<double> cuts;
        for (std::size_t i = 0; i + 1 < n; ++i) cuts.push_back(tau_min + (1.0 - tau_min) * u(rng));
        std::sort(cuts.rbegin(), cuts.rend());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        if (cuts.size() != n - 1 || cuts.front() >= 1.0) continue;
        std::vector<double> tau{1.0};
        tau.insert(tau.end(), cuts.begin(), cuts.end());
        // Confidences on the boundaries are as interesting as the interiors.
        const double c = trial % 4 == 0 ? tau[1 + rng() % (n - 1)] : u(rng);
        EXPECT_EQ(match_slot(tau, c, tau_min), scan(tau, c, tau_min));

        auto cfg = constant_bag(cuts);
        cfg.tau_min = tau_min;
        TemplateBag<int> bag(cfg, 0);
        const auto before = bag.slots();
        const auto got = bag.try_update(c, 1, 1);
        EXPECT_EQ(got, scan(tau, c, tau_min));
        std::size_t changed = 0;
        for (std::size_t i = 0; i < n; ++i) changed += bag.slots()[i].tmpl != before[i].tmpl;
        EXPECT_EQ(changed, got ? 1u : 0u);
    }
}

TEST(Bag, SlotOneSurvivesFuzz) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t n : {1u, 6u, 10u}) {
        TemplateBag<int> bag(BagConfig::defaults(n), -1);
        for (int f = 1; f <= 1000; ++f) {
            const double c = f % 3 == 0 ? 1.0 : u(rng);
            try {
                bag.try_update(c, f, static_cast<std::size_t>(f));
            } catch (const ConfigError&) {
            }
            ASSERT_EQ(bag.slots()[0].tmpl, -1);
            ASSERT_EQ(bag.slots()[0].tau, 1.0);
        }
    }
}

TEST(Bag, FrozenAdaptiveMatchesConstant) {
    BagConfig adaptive = BagConfig::defaults(6);
    adaptive.freeze_cbar = true;
    TemplateBag<int> a(adaptive, 0);
    a.set_running_confidence(0.8);
    const auto tau = a.recompute_thresholds();
    TemplateBag<int> c(constant_bag({tau.begin() + 1, tau.end()}), 0);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int f = 0; f < 2000; ++f) {
        const double conf = u(rng);
        EXPECT_EQ(a.try_update(conf, f, f), c.try_update(conf, f, f));
    }
}
