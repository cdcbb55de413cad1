#pragma once

#include "pdmp/simulate.hpp"
#include "pdmp/value.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pdmp {

/// A near-optimal stopping rule with horizon n (stop no later than the n-th
/// jump) and tolerance epsilon.
struct StoppingPolicy {
    int n = 1;
    double epsilon = 0.05;
};

/// Threshold time along the flow. When waiting for the next jump dominates
/// every grid time, `time` is the boundary exit time, or the truncation
/// horizon with `wait_for_jump` set when the boundary is unreachable.
struct ThresholdTime {
    double time = 0.0;
    bool wait_for_jump = false;
    double k_value = 0.0;
    double sup_j = 0.0;
};

/// Threshold rule for one stage: wait for the jump when K V_level beats the
/// whole J grid by more than the comparison tolerance (ties continue to the
/// grid search, matching the strict inequality); otherwise the smallest grid
/// time whose J value is within eps of the grid supremum.
inline ThresholdTime threshold_time(const ValueFunction& vf, int level,
                                    const HybridState& x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("threshold_time: eps <= 0");
    const BoundedFunction w{
        [&vf, level](const HybridState& y) {
            return vf.evaluate_level(level, y);
        },
        vf.reward().bound};
    const GridScan scan =
        scan_grid(vf.model(), w, vf.reward(), x, vf.config());

    ThresholdTime out;
    out.k_value = scan.k_value;
    out.sup_j = scan.sup_j;
    if (scan.k_value > scan.sup_j + vf.config().comparison_tol) {
        out.time = scan.t_end;
        out.wait_for_jump = !scan.boundary;
        return out;
    }
    const double target = scan.sup_j - eps;
    for (std::size_t i = 0; i < scan.j_values.size(); ++i) {
        if (scan.j_values[i] >= target) {
            out.time = scan.times[i];
            return out;
        }
    }
    out.time = scan.times.back(); // unreachable: sup_j itself meets target
    return out;
}

/// One stage of an executed policy: the stage threshold R (the truncation
/// horizon stands in for an infinite exit time on the wait branch) and the
/// sampled inter-jump time S (+infinity when no jump ever comes).
struct StageRecord {
    double threshold = 0.0;
    double inter_jump = 0.0;
};

struct PolicyPath {
    double stop_time = 0.0;
    HybridState stopped_state;
    double reward = 0.0;
    std::vector<StageRecord> stages;
};

/// Stop time implied by the recorded stage decompositions: the sum over
/// stages of threshold-or-jump, accumulated in execution order so it matches
/// the executed stop time bit for bit.
inline double replay_stop_time(const PolicyPath& path) {
    double acc = 0.0;
    for (const auto& st : path.stages) {
        acc += std::min(st.threshold, st.inter_jump);
    }
    return acc;
}

/// Executes the recursive stopping rule: stage k (0-based) computes the
/// threshold at value level n-k-1 with tolerance eps/2^k at the current
/// post-jump state, stops there if the next jump comes later, and otherwise
/// jumps and recurses. The realized stop time never exceeds the n-th jump
/// time. Thresholds are memoized per (level, eps, state), so replications
/// from a common start pay for the shared stages once.
class PolicyExecutor {
public:
    PolicyExecutor(PdmpModel model, RewardFunction reward,
                   StoppingPolicy policy, SolverConfig config)
        : policy_(policy),
          values_(std::move(model), std::move(reward),
                  policy.n >= 1 ? policy.n - 1 : 0, config) {
        if (policy.n < 1) {
            throw std::invalid_argument("PolicyExecutor: policy.n < 1");
        }
        if (policy.epsilon <= 0.0) {
            throw std::invalid_argument("PolicyExecutor: epsilon <= 0");
        }
    }

    [[nodiscard]] const ValueFunction& values() const noexcept {
        return values_;
    }
    [[nodiscard]] const StoppingPolicy& policy() const noexcept {
        return policy_;
    }

    [[nodiscard]] ThresholdTime threshold(int level, const HybridState& x,
                                          double eps) const {
        char eps_key[40];
        std::snprintf(eps_key, sizeof(eps_key), "%.17g", eps);
        const std::string key =
            std::to_string(level) + "|" + eps_key + "|" + canonical_key(x);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            if (auto it = threshold_cache_.find(key);
                it != threshold_cache_.end()) {
                return it->second;
            }
        }
        const ThresholdTime th = threshold_time(values_, level, x, eps);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            threshold_cache_.emplace(key, th);
        }
        return th;
    }

    [[nodiscard]] PolicyPath execute(const HybridState& x,
                                     RngStream rng) const {
        const PdmpModel& model = values_.model();
        model.require_valid_state(x);

        PolicyPath path;
        HybridState current = x;
        double elapsed = 0.0;
        double eps_stage = policy_.epsilon;

        for (int k = 0; k < policy_.n; ++k) {
            const int level = policy_.n - k - 1;
            const ThresholdTime th = threshold(level, current, eps_stage);
            const double r = th.time;

            const double u = rng.uniform_open01();
            const double s = sample_jump_time(model, current, u,
                                              1e-10, values_.config().quad_tol);
            path.stages.push_back(StageRecord{r, s});

            if (s <= r) {
                const HybridState pre_jump = model.flow(current, s);
                const double u2 = rng.uniform_open01();
                current = sample_post_jump_u(model, pre_jump, u2);
                elapsed += s;
            } else {
                path.stop_time = elapsed + r;
                path.stopped_state = model.flow(current, r);
                path.reward = values_.reward()(path.stopped_state);
                return path;
            }
            eps_stage *= 0.5;
        }
        path.stop_time = elapsed;
        path.stopped_state = current;
        path.reward = values_.reward()(current);
        return path;
    }

private:
    StoppingPolicy policy_;
    ValueFunction values_;
    mutable std::unordered_map<std::string, ThresholdTime> threshold_cache_;
    mutable std::mutex mutex_;
};

inline PolicyPath execute_policy(const PdmpModel& model,
                                 const RewardFunction& reward,
                                 const StoppingPolicy& policy,
                                 const HybridState& x,
                                 const SolverConfig& config, RngStream rng) {
    PolicyExecutor executor(model, reward, policy, config);
    return executor.execute(x, std::move(rng));
}

/// Monte Carlo evaluation of an executed policy over independent streams.
struct PolicyEvaluation {
    double mean = 0.0;
    double standard_error = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    std::size_t samples = 0;
};

inline PolicyEvaluation evaluate_policy(const PdmpModel& model,
                                        const RewardFunction& reward,
                                        const StoppingPolicy& policy,
                                        const HybridState& x, std::size_t m,
                                        const SolverConfig& config,
                                        std::uint64_t seed,
                                        std::uint64_t stream_base = 0) {
    if (m < 2) throw std::invalid_argument("evaluate_policy: m < 2");
    PolicyExecutor executor(model, reward, policy, config);

    std::vector<double> rewards(m);
    for (std::size_t i = 0; i < m; ++i) {
        rewards[i] =
            executor.execute(x, RngStream(seed, stream_base + i)).reward;
    }

    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(m - 1);

    PolicyEvaluation out;
    out.mean = mean;
    out.standard_error = std::sqrt(var / static_cast<double>(m));
    out.ci95_low = mean - 1.96 * out.standard_error;
    out.ci95_high = mean + 1.96 * out.standard_error;
    out.samples = m;
    return out;
}

} // namespace pdmp
