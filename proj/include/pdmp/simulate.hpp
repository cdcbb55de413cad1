#pragma once

#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pdmp {

/// One jump of the embedded chain: the inter-jump time S_n and the post-jump
/// state Z_n.
struct JumpRecord {
    double s = 0.0;
    HybridState z;
};

/// The embedded chain of a simulated path. The continuous-time trajectory is
/// reconstructed by flowing deterministically from the latest post-jump
/// state; `horizon` is the time up to which the path is known (the last jump
/// time for a jump-count stop rule, the requested horizon otherwise).
/// `truncated` marks paths cut short by the explosion guard.
struct Trajectory {
    HybridState initial;
    std::vector<JumpRecord> jumps;
    bool truncated = false;
    double horizon = 0.0;

    [[nodiscard]] std::size_t jump_count() const noexcept {
        return jumps.size();
    }

    /// T_n, the time of the n-th jump (n is 1-based; T_0 = 0).
    [[nodiscard]] double jump_time(std::size_t n) const {
        double t = 0.0;
        for (std::size_t i = 0; i < n && i < jumps.size(); ++i) {
            t += jumps[i].s;
        }
        return t;
    }

    bool operator==(const Trajectory& other) const {
        if (!(initial == other.initial) || truncated != other.truncated ||
            horizon != other.horizon || jumps.size() != other.jumps.size()) {
            return false;
        }
        for (std::size_t i = 0; i < jumps.size(); ++i) {
            if (jumps[i].s != other.jumps[i].s ||
                !(jumps[i].z == other.jumps[i].z)) {
                return false;
            }
        }
        return true;
    }
};

/// Stop rule for simulation: run for a fixed number of jumps or to a time
/// horizon.
struct StopRule {
    enum class Kind { JumpCount, TimeHorizon };
    Kind kind = Kind::TimeHorizon;
    std::size_t jump_count = 0;
    double horizon = 0.0;

    static StopRule after_jumps(std::size_t n) {
        StopRule r;
        r.kind = Kind::JumpCount;
        r.jump_count = n;
        return r;
    }
    static StopRule at_time(double t) {
        StopRule r;
        r.kind = Kind::TimeHorizon;
        r.horizon = t;
        return r;
    }
};

/// Simulates a path by alternating jump-time and post-jump draws, flowing
/// deterministically in between. The uniform variates are consumed in strict
/// alternation from a single stream: U1 drives the first jump time, U2 the
/// first post-jump draw, U3 the second jump time, and so on; replications
/// should use distinct stream indices. A finite boundary exit forces a jump
/// from the boundary point. The max_jumps guard sets `truncated` instead of
/// running away.
inline Trajectory simulate(const PdmpModel& model, const HybridState& x0,
                           const StopRule& rule, RngStream rng,
                           double jump_time_tol = 1e-10,
                           double quad_tol = 1e-10) {
    model.require_valid_state(x0);
    if (rule.kind == StopRule::Kind::JumpCount &&
        rule.jump_count > model.max_jumps) {
        throw std::invalid_argument("simulate: jump count exceeds max_jumps");
    }

    Trajectory traj;
    traj.initial = x0;

    HybridState current = x0;
    double elapsed = 0.0;

    while (true) {
        if (rule.kind == StopRule::Kind::JumpCount &&
            traj.jumps.size() >= rule.jump_count) {
            traj.horizon = elapsed;
            return traj;
        }
        if (rule.kind == StopRule::Kind::TimeHorizon &&
            traj.jumps.size() >= model.max_jumps) {
            traj.truncated = true;
            traj.horizon = elapsed;
            return traj;
        }

        const double u1 = rng.uniform_open01();
        const double s = sample_jump_time(model, current, u1, jump_time_tol,
                                          quad_tol);

        if (rule.kind == StopRule::Kind::TimeHorizon &&
            !(elapsed + s <= rule.horizon)) {
            traj.horizon = rule.horizon;
            return traj;
        }
        if (s == kInfiniteTime) {
            // No jump will ever occur on this path; a jump-count rule can
            // never be met.
            traj.horizon = kInfiniteTime;
            return traj;
        }

        const HybridState pre_jump = model.flow(current, s);
        const double u2 = rng.uniform_open01();
        current = sample_post_jump_u(model, pre_jump, u2);
        elapsed += s;
        traj.jumps.push_back(JumpRecord{s, current});
    }
}

/// State of the reconstructed continuous-time path at time t: flows the last
/// post-jump state before t, right-continuously.
inline HybridState state_at(const Trajectory& traj, const PdmpModel& model,
                            double t) {
    if (t < 0.0) throw std::invalid_argument("state_at: t < 0");
    if (t > traj.horizon) {
        throw std::out_of_range("state_at: t beyond trajectory coverage");
    }
    HybridState base = traj.initial;
    double base_time = 0.0;
    for (const auto& jump : traj.jumps) {
        if (base_time + jump.s > t) break;
        base_time += jump.s;
        base = jump.z;
    }
    if (t == base_time) return base;
    return model.flow(base, t - base_time);
}

} // namespace pdmp
