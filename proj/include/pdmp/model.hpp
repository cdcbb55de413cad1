#pragma once

#include "pdmp/point_measure.hpp"
#include "pdmp/quadrature.hpp"
#include "pdmp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pdmp {

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// One possible post-jump state together with its probability.
struct JumpOutcome {
    HybridState state;
    double probability = 0.0;
};

/// Transition kernel for the post-jump location. Either form may be
/// provided; enumerable kernels allow exact expectations, the sampling form
/// covers kernels with non-enumerable support. A kernel must never return
/// its input state.
struct JumpKernel {
    std::function<std::vector<JumpOutcome>(const HybridState&)> enumerate;
    std::function<HybridState(const HybridState&, double)> sample;

    [[nodiscard]] bool enumerable() const noexcept {
        return static_cast<bool>(enumerate);
    }
    [[nodiscard]] bool sampleable() const noexcept {
        return static_cast<bool>(sample);
    }
};

/// Local characteristics of a measure-valued piecewise deterministic Markov
/// process: deterministic flow between jumps, jump intensity along the flow,
/// post-jump kernel, and the deterministic boundary exit time. The flow must
/// preserve the mode and satisfy the semigroup law; the intensity must be
/// finite and integrable along the flow. Optional closed forms for the
/// cumulative hazard and for the inverse of the jump-time survivor function
/// short-circuit quadrature and root finding when registered.
struct PdmpModel {
    std::vector<int> modes{0};
    std::function<HybridState(const HybridState&, double)> flow;
    std::function<double(const HybridState&)> intensity;
    JumpKernel kernel;
    std::function<double(const HybridState&)> exit_time;
    std::size_t max_jumps = 1'000'000;

    // Optional closed forms.
    std::function<double(const HybridState&, double)> hazard;
    std::function<double(const HybridState&, double)> jump_time_inverse;

    [[nodiscard]] bool has_mode(int mode) const {
        return std::find(modes.begin(), modes.end(), mode) != modes.end();
    }

    void require_valid_state(const HybridState& x) const {
        if (!has_mode(x.mode)) {
            throw std::invalid_argument("state mode not in the model mode set");
        }
    }
};

/// Cumulative hazard along the flow from x over [0, t]: the integral of the
/// intensity along the deterministic trajectory, via the registered closed
/// form or adaptive quadrature.
inline double cumulative_hazard(const PdmpModel& model, const HybridState& x,
                                double t, double quad_tol = 1e-10) {
    if (t < 0.0) throw std::invalid_argument("cumulative_hazard: t < 0");
    if (t == 0.0) return 0.0;
    if (model.hazard) return model.hazard(x, t);
    return adaptive_simpson(
        [&](double s) { return model.intensity(model.flow(x, s)); }, 0.0, t,
        quad_tol);
}

/// Survivor function of the first jump time from x: the no-jump probability
/// exp(-Lambda(x,t)), cut to zero once the flow reaches the boundary.
inline double survivor(const PdmpModel& model, const HybridState& x, double t,
                       double quad_tol = 1e-10) {
    if (t < 0.0) throw std::invalid_argument("survivor: t < 0");
    const double t_star = model.exit_time ? model.exit_time(x) : kInfiniteTime;
    if (t >= t_star) return 0.0;
    return std::exp(-cumulative_hazard(model, x, t, quad_tol));
}

/// Inverse-transform sample of the first jump time: the smallest t with
/// F(x, t) <= u. Uses the registered closed-form inverse when available,
/// otherwise brackets on a doubling grid and bisects on F (monotone, so
/// bisection is unconditionally safe) to absolute tolerance `tol`. Returns
/// the boundary exit time when the exponential clock has not rung by then,
/// and +infinity when no jump ever occurs.
inline double sample_jump_time(const PdmpModel& model, const HybridState& x,
                               double u, double tol = 1e-10,
                               double quad_tol = 1e-10) {
    if (!(u > 0.0 && u < 1.0)) {
        throw std::invalid_argument("sample_jump_time: u must be in (0,1)");
    }
    const double t_star = model.exit_time ? model.exit_time(x) : kInfiniteTime;

    if (model.jump_time_inverse) {
        const double t = model.jump_time_inverse(x, u);
        return std::min(t, t_star);
    }

    const double target = -std::log(u); // solve Lambda(x, t) = target
    const auto hazard_at = [&](double t) {
        return cumulative_hazard(model, x, t, quad_tol);
    };

    if (std::isfinite(t_star)) {
        if (hazard_at(t_star) < target) return t_star; // forced boundary jump
        double lo = 0.0, hi = t_star;
        return bisect_first_true(
            [&](double t) { return hazard_at(t) >= target; }, lo, hi, tol);
    }

    double lo = 0.0;
    double hi = 1.0;
    constexpr double kBracketCap = 0x1p60; // ~1.15e18
    while (hazard_at(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > kBracketCap) return kInfiniteTime;
    }
    return bisect_first_true([&](double t) { return hazard_at(t) >= target; },
                             lo, hi, tol);
}

namespace detail {

inline void check_enumeration(const HybridState& y,
                              const std::vector<JumpOutcome>& outcomes) {
    if (outcomes.empty()) {
        throw std::runtime_error("jump kernel enumerated no outcomes");
    }
    double total = 0.0;
    for (const auto& o : outcomes) {
        if (o.probability < 0.0) {
            throw std::runtime_error("jump kernel: negative probability");
        }
        if (o.state == y) {
            throw std::runtime_error("jump kernel: no-move jump outcome");
        }
        total += o.probability;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
        throw std::runtime_error("jump kernel: probabilities do not sum to 1");
    }
}

} // namespace detail

/// Post-jump draw from the kernel at the pre-jump location y, driven by one
/// uniform variate. Enumerable kernels use inverse transform over the
/// outcome list in its stable order.
inline HybridState sample_post_jump_u(const PdmpModel& model,
                                      const HybridState& y, double u) {
    if (model.kernel.enumerable()) {
        const auto outcomes = model.kernel.enumerate(y);
        detail::check_enumeration(y, outcomes);
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < outcomes.size(); ++i) {
            acc += outcomes[i].probability;
            if (u < acc) return outcomes[i].state;
        }
        return outcomes.back().state;
    }
    if (model.kernel.sampleable()) {
        HybridState z = model.kernel.sample(y, u);
        if (z == y) {
            throw std::runtime_error("jump kernel: no-move jump sampled");
        }
        return z;
    }
    throw std::runtime_error("jump kernel provides neither form");
}

inline HybridState sample_post_jump(const PdmpModel& model,
                                    const HybridState& y, RngStream& rng) {
    return sample_post_jump_u(model, y, rng.uniform_open01());
}

} // namespace pdmp
