#pragma once

// Bag of n target templates with adaptive per-slot update thresholds.
//
// Slot 1 holds the first-frame template and never changes. Slots 2..n are
// split into an above-mean group, whose thresholds sit between the running
// average confidence and 1:
//
//     tau_i = 1 - (1 - cbar) / T_i
//
// and a below-mean group, which covers the more diverse appearances:
//
//     tau_i = 1 + (tau_min - cbar) / T_i
//
// A frame with confidence C >= tau_min replaces the template of the slot whose
// interval [tau_i, tau_{i-1}) contains C.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mttsiam/error.hpp"

namespace mttsiam {

enum class SlotGroup { Fixed, AboveMean, BelowMean };
enum class ThresholdMode { Adaptive, Constant };
/// How cbar averages the qualifying confidences.
enum class AverageMode { Ema, CumulativeMean };

struct BagConfig {
    std::size_t n = 6;
    double tau_min = 0.5;
    /// T_i for slots 2..n (n-1 entries).
    std::vector<double> slot_weights;
    /// How many leading entries of slot_weights form the above-mean group.
    std::size_t above_mean_slots = 0;
    /// W_i for slots 1..n, consumed by score fusion.
    std::vector<double> fusion_weights;
    double cbar_alpha = 0.05;
    ThresholdMode mode = ThresholdMode::Adaptive;
    /// tau_2..tau_n used in Constant mode.
    std::vector<double> constant_thresholds;
    AverageMode average = AverageMode::Ema;
    /// Keeps cbar at its seed value. Used to compare adaptive and constant modes.
    bool freeze_cbar = false;

    void validate() const;

    /// Defaults for a bag of n slots. n = 6 uses the fusion weights
    /// [0.30, 0.20, 0.14, 0.14, 0.11, 0.11]; other sizes give slot 1 twice the
    /// weight of each remaining slot.
    static BagConfig defaults(std::size_t n);
};

inline BagConfig BagConfig::defaults(std::size_t n) {
    BagConfig cfg;
    cfg.n = n;
    if (n == 0) return cfg;
    const std::size_t rest = n - 1;
    cfg.above_mean_slots = rest / 2;
    const std::size_t below = rest - cfg.above_mean_slots;
    for (std::size_t k = 0; k < cfg.above_mean_slots; ++k)
        cfg.slot_weights.push_back(12.0 + 8.0 * static_cast<double>(cfg.above_mean_slots - 1 - k));
    for (std::size_t k = 0; k < below; ++k) {
        const double t = below == 1 ? 1.0
                                    : 1.3 - 0.3 * static_cast<double>(k) /
                                                static_cast<double>(below - 1);
        cfg.slot_weights.push_back(t);
    }
    if (n == 6) {
        cfg.fusion_weights = {0.30, 0.20, 0.14, 0.14, 0.11, 0.11};
    } else {
        const double unit = 1.0 / static_cast<double>(n + 1);
        cfg.fusion_weights.assign(n, unit);
        cfg.fusion_weights[0] = n == 1 ? 1.0 : 2.0 * unit;
    }
    // Constant thresholds evenly spaced from 0.95 down to 0.70.
    for (std::size_t k = 0; k < rest; ++k) {
        const double t = rest == 1 ? 0.95
                                   : 0.95 - 0.25 * static_cast<double>(k) /
                                                static_cast<double>(rest - 1);
        cfg.constant_thresholds.push_back(t);
    }
    return cfg;
}

inline void BagConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("bag config: " + msg); };
    if (n < 1) fail("n must be at least 1");
    if (!(tau_min > 0.0 && tau_min < 1.0)) fail("tau_min must lie in (0, 1)");
    if (slot_weights.size() != n - 1) fail("slot_weights needs n-1 entries");
    for (double t : slot_weights)
        if (!(t > 0.0) || !std::isfinite(t)) fail("slot weights must be positive");
    if (above_mean_slots > n - 1) fail("above_mean_slots exceeds n-1");
    if (fusion_weights.size() != n) fail("fusion_weights needs n entries");
    double sum = 0.0;
    for (double w : fusion_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) fail("fusion weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("fusion weights must sum to 1");
    if (!(cbar_alpha > 0.0 && cbar_alpha < 1.0)) fail("cbar_alpha must lie in (0, 1)");
    if (mode == ThresholdMode::Constant) {
        if (constant_thresholds.size() != n - 1) fail("constant thresholds need n-1 entries");
        double prev = 1.0;
        for (std::size_t i = 0; i < constant_thresholds.size(); ++i) {
            const double t = constant_thresholds[i];
            if (!(t < prev))
                fail("constant thresholds must be strictly decreasing below 1");
            if (t < tau_min) fail("constant thresholds must be >= tau_min");
            prev = t;
        }
    }
}

/// Result of a threshold recomputation. tau[0] is slot 1 and always 1.
struct Thresholds {
    std::vector<double> tau;
    /// cbar == 1 collapsed the above-mean group onto 1; those slots do not update.
    bool degenerate = false;
};

/// Evaluates the adaptive thresholds for `cbar` and checks monotonicity.
/// Throws ConfigError naming the first offending adjacent pair.
inline Thresholds compute_thresholds(const BagConfig& cfg, double cbar) {
    Thresholds out;
    out.tau.reserve(cfg.n);
    out.tau.push_back(1.0);
    if (cfg.mode == ThresholdMode::Constant) {
        out.tau.insert(out.tau.end(), cfg.constant_thresholds.begin(),
                       cfg.constant_thresholds.end());
        return out;
    }
    out.degenerate = cbar >= 1.0 && cfg.above_mean_slots > 0;
    for (std::size_t k = 0; k + 1 < cfg.n; ++k) {
        const double T = cfg.slot_weights[k];
        double tau = k < cfg.above_mean_slots ? 1.0 - (1.0 - cbar) / T
                                              : 1.0 + (cfg.tau_min - cbar) / T;
        if (tau < cfg.tau_min) tau = cfg.tau_min;
        out.tau.push_back(tau);
    }
    for (std::size_t i = 1; i < out.tau.size(); ++i) {
        const bool collapsed_above = out.degenerate && i <= cfg.above_mean_slots;
        if (collapsed_above) continue;
        if (!(out.tau[i] < out.tau[i - 1])) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "thresholds not strictly decreasing at cbar=" << cbar << ": tau_" << i + 1
                << "=" << out.tau[i] << " is not below tau_" << i << "=" << out.tau[i - 1];
            throw ConfigError(msg.str());
        }
    }
    return out;
}

/// Finds the 1-based slot whose interval contains `confidence`.
///
/// Slot i >= 2 owns [tau_i, tau_{i-1}); the interval is closed at the top when
/// tau_{i-1} is 1. Slots collapsed onto 1 are skipped. Confidences in
/// [tau_min, tau_n) go to slot n. Returns nullopt below tau_min and for n = 1.
inline std::optional<std::size_t> match_slot(std::span<const double> tau, double confidence,
                                             double tau_min) {
    if (confidence < tau_min || tau.size() < 2) return std::nullopt;
    for (std::size_t i = 1; i < tau.size(); ++i) {
        if (tau[i] >= 1.0) continue;
        const double upper = tau[i - 1];
        const bool below_upper = confidence < upper || upper >= 1.0;
        if (tau[i] <= confidence && below_upper) return i + 1;
    }
    if (confidence < tau.back()) return tau.size();
    return std::nullopt;
}

template <class Template>
struct TemplateSlot {
    std::size_t index = 1;
    Template tmpl{};
    double tau = 1.0;
    /// T_i; zero for the fixed slot.
    double weight = 0.0;
    SlotGroup group = SlotGroup::Fixed;
    std::optional<std::size_t> last_update_frame;
};

template <class Template>
class TemplateBag {
public:
    TemplateBag(BagConfig config, Template first) : config_(std::move(config)) {
        config_.validate();
        slots_.reserve(config_.n);
        for (std::size_t i = 0; i < config_.n; ++i) {
            TemplateSlot<Template> slot;
            slot.index = i + 1;
            slot.tmpl = first;
            if (i == 0) {
                slot.group = SlotGroup::Fixed;
            } else {
                slot.weight = config_.slot_weights[i - 1];
                slot.group = i - 1 < config_.above_mean_slots ? SlotGroup::AboveMean
                                                              : SlotGroup::BelowMean;
            }
            slots_.push_back(std::move(slot));
        }
        recompute_thresholds();
    }

    const BagConfig& config() const { return config_; }
    const std::vector<TemplateSlot<Template>>& slots() const { return slots_; }
    std::size_t size() const { return slots_.size(); }
    double running_confidence() const { return cbar_; }
    bool degenerate() const { return degenerate_; }
    /// Number of recomputations that hit cbar == 1.
    std::size_t degenerate_events() const { return degenerate_events_; }

    std::vector<double> thresholds() const {
        std::vector<double> tau;
        tau.reserve(slots_.size());
        for (const auto& s : slots_) tau.push_back(s.tau);
        return tau;
    }

    /// Overrides cbar, e.g. to pin it before comparing against constant mode.
    void set_running_confidence(double cbar) { cbar_ = cbar; }

    /// Recomputes every tau_i from the current cbar. On error the stored
    /// thresholds are left unchanged and ConfigError propagates.
    std::vector<double> recompute_thresholds() {
        Thresholds t = compute_thresholds(config_, cbar_);
        for (std::size_t i = 0; i < slots_.size(); ++i) slots_[i].tau = t.tau[i];
        degenerate_ = t.degenerate;
        if (degenerate_) ++degenerate_events_;
        return t.tau;
    }

    /// Folds a confidence into cbar. Confidences below tau_min are ignored.
    double update_running_confidence(double confidence) {
        if (confidence < config_.tau_min || config_.freeze_cbar) return cbar_;
        if (config_.average == AverageMode::Ema) {
            cbar_ = (1.0 - config_.cbar_alpha) * cbar_ + config_.cbar_alpha * confidence;
        } else {
            ++samples_;
            cbar_ += (confidence - cbar_) / static_cast<double>(samples_);
        }
        return cbar_;
    }

    /// Offers `candidate` for the frame's confidence. Updates cbar first, then
    /// the thresholds, then replaces at most one slot (never slot 1). Returns
    /// the 1-based index of the replaced slot.
    std::optional<std::size_t> try_update(double confidence, Template candidate,
                                          std::size_t frame) {
        if (confidence < config_.tau_min) return std::nullopt;
        update_running_confidence(confidence);
        recompute_thresholds();
        const auto tau = thresholds();
        const auto slot = match_slot(tau, confidence, config_.tau_min);
        if (!slot) return std::nullopt;
        auto& s = slots_[*slot - 1];
        s.tmpl = std::move(candidate);
        s.last_update_frame = frame;
        return slot;
    }

private:
    BagConfig config_;
    std::vector<TemplateSlot<Template>> slots_;
    double cbar_ = 1.0;
    // The seed value 1.0 counts as the first sample of the cumulative mean.
    std::size_t samples_ = 1;
    bool degenerate_ = false;
    std::size_t degenerate_events_ = 0;
};

}  // namespace mttsiam
