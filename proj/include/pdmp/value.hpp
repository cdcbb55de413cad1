#pragma once

#include "pdmp/solver.hpp"

#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pdmp {

/// Per-state solver diagnostics recorded with each value evaluation.
struct ValueDiagnostics {
    double value = 0.0;
    double arg_sup = 0.0;
    double k_value = 0.0;
    double sup_j = 0.0;
    double truncation_bound = 0.0;
    double t_end = 0.0;
};

/// Value function of the random-horizon stopping problem, built by iterating
/// the one-step operator: level 0 is the reward itself, level n applies the
/// stop-or-wait compromise to level n-1. Inner evaluations are performed
/// recursively on demand and memoized per canonical state, so repeated
/// post-jump states are paid for once. Evaluation is const and
/// thread-compatible (the memo cache takes a lock around lookups and
/// insertions only).
class ValueFunction {
public:
    ValueFunction(PdmpModel model, RewardFunction reward, int horizon,
                  SolverConfig config)
        : model_(std::move(model)),
          reward_(std::move(reward)),
          horizon_(horizon),
          config_(config),
          caches_(static_cast<std::size_t>(horizon < 0 ? 0 : horizon) + 1) {
        if (horizon < 0) {
            throw std::invalid_argument("ValueFunction: horizon < 0");
        }
        config_.validate();
    }

    [[nodiscard]] int horizon() const noexcept { return horizon_; }
    [[nodiscard]] const PdmpModel& model() const noexcept { return model_; }
    [[nodiscard]] const RewardFunction& reward() const noexcept {
        return reward_;
    }
    [[nodiscard]] const SolverConfig& config() const noexcept {
        return config_;
    }

    [[nodiscard]] double evaluate(const HybridState& x) const {
        return evaluate_level(horizon_, x);
    }

    [[nodiscard]] double evaluate_level(int level, const HybridState& x) const {
        if (level == 0) return reward_(x);
        return diagnostics_level(level, x).value;
    }

    [[nodiscard]] ValueDiagnostics diagnostics(const HybridState& x) const {
        return diagnostics_level(horizon_, x);
    }

    [[nodiscard]] ValueDiagnostics diagnostics_level(int level,
                                                     const HybridState& x) const {
        if (level < 0 || level > horizon_) {
            throw std::invalid_argument("ValueFunction: level out of range");
        }
        if (level == 0) {
            ValueDiagnostics d;
            d.value = reward_(x);
            d.k_value = d.sup_j = d.value;
            return d;
        }
        const std::string key = canonical_key(x);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const auto& cache = caches_[static_cast<std::size_t>(level)];
            if (auto it = cache.find(key); it != cache.end()) {
                return it->second;
            }
        }
        const BoundedFunction w{
            [this, level](const HybridState& y) {
                return evaluate_level(level - 1, y);
            },
            reward_.bound};
        const LValue l = op_L(model_, w, reward_, x, config_);
        ValueDiagnostics d;
        d.value = l.value;
        d.arg_sup = l.arg_sup;
        d.k_value = l.k_value;
        d.sup_j = l.sup_j;
        d.truncation_bound = l.truncation_bound;
        d.t_end = l.t_end;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            caches_[static_cast<std::size_t>(level)].emplace(key, d);
        }
        return d;
    }

    /// Warns about configurations whose nested evaluation cost grows
    /// exponentially; probes the kernel branching factor at the given state.
    [[nodiscard]] std::optional<std::string> cost_note(
        const HybridState& x) const {
        if (horizon_ <= 3 || !model_.kernel.enumerable()) return std::nullopt;
        const std::size_t outcomes = model_.kernel.enumerate(x).size();
        if (outcomes <= 8) return std::nullopt;
        return "horizon " + std::to_string(horizon_) + " with " +
               std::to_string(outcomes) +
               " kernel outcomes: nested evaluation cost grows exponentially";
    }

private:
    PdmpModel model_;
    RewardFunction reward_;
    int horizon_;
    SolverConfig config_;
    mutable std::vector<std::unordered_map<std::string, ValueDiagnostics>>
        caches_;
    mutable std::mutex mutex_;
};

inline ValueFunction value_iterate(PdmpModel model, RewardFunction reward,
                                   int horizon, SolverConfig config) {
    return ValueFunction(std::move(model), std::move(reward), horizon, config);
}

} // namespace pdmp
