#pragma once

#include "pdmp/model.hpp"
#include "pdmp/point_measure.hpp"
#include "pdmp/quadrature.hpp"
#include "pdmp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pdmp {

/// Numerical parameters of the stopping solver: time-grid resolution for the
/// supremum search, hard truncation horizon, quadrature tolerance, sample
/// count for non-enumerable kernels, and the tolerance of the
/// K-versus-supremum branch test.
struct SolverConfig {
    double t_max = 50.0;
    int nbpt = 10000;
    double quad_tol = 1e-10;
    int kernel_mc_samples = 4096;
    double comparison_tol = 1e-9;

    /// Horizon rule: the grid ends at the smallest t with F(x,t) below this
    /// cutoff (found by doubling and bisection), capped at t_max.
    double survivor_cutoff = 1e-8;

    /// Optional golden-section refinement of the supremum around the best
    /// grid point. Off by default to keep the plain grid estimator.
    bool refine_sup = false;

    std::uint64_t kernel_mc_seed = 0x9d2c5680a5b1c0deULL;

    void validate() const {
        if (!(t_max > 0.0)) throw std::invalid_argument("SolverConfig: t_max <= 0");
        if (nbpt < 2) throw std::invalid_argument("SolverConfig: nbpt < 2");
        if (!(quad_tol > 0.0)) throw std::invalid_argument("SolverConfig: quad_tol <= 0");
        if (kernel_mc_samples < 1) {
            throw std::invalid_argument("SolverConfig: kernel_mc_samples < 1");
        }
    }
};

/// A bounded measurable function together with a known finite sup bound.
struct BoundedFunction {
    std::function<double(const HybridState&)> fn;
    double bound = 1.0;

    double operator()(const HybridState& x) const { return fn(x); }
};

using RewardFunction = BoundedFunction;

/// Expectation of w under the jump kernel at the pre-jump location y.
/// Exact for enumerable kernels; otherwise a fixed-size Monte Carlo mean on
/// a sub-stream derived deterministically from the state, so the result is a
/// deterministic function of y (adaptive quadrature over it stays sound).
inline double kernel_expectation(const PdmpModel& model,
                                 const BoundedFunction& w,
                                 const HybridState& y,
                                 const SolverConfig& cfg) {
    if (model.kernel.enumerable()) {
        const auto outcomes = model.kernel.enumerate(y);
        detail::check_enumeration(y, outcomes);
        double acc = 0.0;
        for (const auto& o : outcomes) acc += o.probability * w(o.state);
        return acc;
    }
    if (!model.kernel.sampleable()) {
        throw std::runtime_error("jump kernel provides neither form");
    }
    const std::string key = canonical_key(y);
    RngStream rng(cfg.kernel_mc_seed ^ fnv1a64(key.data(), key.size()), 0);
    double acc = 0.0;
    for (int i = 0; i < cfg.kernel_mc_samples; ++i) {
        acc += w(sample_post_jump(model, y, rng));
    }
    return acc / static_cast<double>(cfg.kernel_mc_samples);
}

/// Truncation horizon for a state: the boundary exit time when it comes
/// first, otherwise the smallest t with F(x,t) < survivor_cutoff, found by
/// doubling and bisection and capped at t_max.
inline double effective_horizon(const PdmpModel& model, const HybridState& x,
                                const SolverConfig& cfg) {
    const double t_star = model.exit_time ? model.exit_time(x) : kInfiniteTime;
    if (t_star <= cfg.t_max) return t_star;

    const auto below = [&](double t) {
        return survivor(model, x, t, cfg.quad_tol) < cfg.survivor_cutoff;
    };
    double hi = std::min(1.0, cfg.t_max);
    while (hi < cfg.t_max && !below(hi)) hi = std::min(2.0 * hi, cfg.t_max);
    if (!below(hi)) return cfg.t_max;
    return bisect_first_true(below, 0.0, hi, 1e-6 * hi);
}

/// One-step operator along the flow: H w(x,t) = w(Phi(x, t^)) exp(-Lambda),
/// with t^ the time clipped at the boundary exit.
inline double op_H(const PdmpModel& model, const BoundedFunction& w,
                   const HybridState& x, double t, const SolverConfig& cfg) {
    if (t < 0.0) throw std::invalid_argument("op_H: t < 0");
    const double t_star = model.exit_time ? model.exit_time(x) : kInfiniteTime;
    const double teff = std::min(t, t_star);
    return w(model.flow(x, teff)) *
           std::exp(-cumulative_hazard(model, x, teff, cfg.quad_tol));
}

/// Jump-before-t operator: I w(x,t) = integral over [0, t^] of
/// (lambda Qw)(Phi(x,s)) exp(-Lambda(x,s)) ds, i.e. E[w(Z1) 1{S1 <= t^}].
inline double op_I(const PdmpModel& model, const BoundedFunction& w,
                   const HybridState& x, double t, const SolverConfig& cfg) {
    if (t < 0.0) throw std::invalid_argument("op_I: t < 0");
    const double t_star = model.exit_time ? model.exit_time(x) : kInfiniteTime;
    const double teff = std::min(t, t_star);
    if (teff == 0.0) return 0.0;
    return adaptive_simpson(
        [&](double s) {
            const HybridState state = model.flow(x, s);
            return model.intensity(state) *
                   kernel_expectation(model, w, state, cfg) *
                   std::exp(-cumulative_hazard(model, x, s, cfg.quad_tol));
        },
        0.0, teff, cfg.quad_tol);
}

/// Next-jump expectation K w(x) = E[w(Z1)], split into its integral part and
/// the tail term. With a finite exit time the tail is the exact boundary-jump
/// contribution. With an infinite exit time the integral is truncated at the
/// effective horizon and the unreachable boundary term is replaced by the
/// truncation bound ||w|| F(x, t_end) itself, so the result stays within
/// ||w|| F(x, t_end) of the exact value and the bound is reported.
struct KValue {
    double value = 0.0;
    double integral_part = 0.0;
    double tail_term = 0.0;
    double truncation_bound = 0.0;
    double t_end = 0.0;
    bool boundary = false;
};

inline KValue op_K(const PdmpModel& model, const BoundedFunction& w,
                   const HybridState& x, const SolverConfig& cfg) {
    KValue out;
    out.t_end = effective_horizon(model, x, cfg);
    const double t_star = model.exit_time ? model.exit_time(x) : kInfiniteTime;
    out.boundary = (t_star <= cfg.t_max);
    out.integral_part = op_I(model, w, x, out.t_end, cfg);
    // exp(-Lambda) at the end of the integration window; for a boundary exit
    // this is the left limit of F at t*, which carries the boundary jump.
    const double surv_end =
        std::exp(-cumulative_hazard(model, x, out.t_end, cfg.quad_tol));
    if (out.boundary) {
        const HybridState boundary_state = model.flow(x, t_star);
        out.tail_term =
            kernel_expectation(model, w, boundary_state, cfg) * surv_end;
        out.truncation_bound = 0.0;
    } else {
        out.tail_term = w.bound * surv_end;
        out.truncation_bound = out.tail_term;
    }
    out.value = out.integral_part + out.tail_term;
    return out;
}

/// Stop-or-continue compromise at horizon t: J(w,g)(x,t) = H g(x,t) + I w(x,t).
inline double op_J(const PdmpModel& model, const BoundedFunction& w,
                   const BoundedFunction& g, const HybridState& x, double t,
                   const SolverConfig& cfg) {
    return op_H(model, g, x, t, cfg) + op_I(model, w, x, t, cfg);
}

/// Joint evaluation of the J grid and K on the shared node set.
///
/// The grid has nbpt points on [0, t_end]; the I integrand is evaluated at
/// the grid points and panel midpoints and accumulated by composite Simpson,
/// so J at every grid time and the integral part of K come from one pass
/// over the same deterministic nodes (which also keeps value iteration
/// monotone in its first argument).
struct GridScan {
    std::vector<double> times;
    std::vector<double> h_values;
    std::vector<double> i_values;
    std::vector<double> j_values;
    double sup_j = 0.0;
    double arg_sup = 0.0;
    double k_value = 0.0;
    double k_integral = 0.0;
    double truncation_bound = 0.0;
    double t_end = 0.0;
    bool boundary = false;
};

inline GridScan scan_grid(const PdmpModel& model, const BoundedFunction& w,
                          const BoundedFunction& g, const HybridState& x,
                          const SolverConfig& cfg) {
    cfg.validate();
    model.require_valid_state(x);

    GridScan scan;
    scan.t_end = effective_horizon(model, x, cfg);
    const double t_star = model.exit_time ? model.exit_time(x) : kInfiniteTime;
    scan.boundary = (t_star <= cfg.t_max);

    const int n = cfg.nbpt;
    const std::size_t fine_count = 2 * static_cast<std::size_t>(n - 1) + 1;
    const double denom = static_cast<double>(fine_count - 1);

    std::vector<double> surv(fine_count);
    std::vector<double> integrand(fine_count);
    std::vector<HybridState> coarse_states(static_cast<std::size_t>(n));

    const bool have_hazard = static_cast<bool>(model.hazard);
    double hazard_acc = 0.0;
    double prev_s = 0.0;

    for (std::size_t k = 0; k < fine_count; ++k) {
        const double s = scan.t_end * static_cast<double>(k) / denom;
        const HybridState state = model.flow(x, s);
        double lambda_here = model.intensity(state);
        if (have_hazard) {
            hazard_acc = model.hazard(x, s);
        } else if (k > 0) {
            hazard_acc += adaptive_simpson(
                [&](double r) { return model.intensity(model.flow(x, r)); },
                prev_s, s, cfg.quad_tol / static_cast<double>(fine_count));
        }
        prev_s = s;
        surv[k] = std::exp(-hazard_acc);
        integrand[k] =
            lambda_here * kernel_expectation(model, w, state, cfg) * surv[k];
        if (k % 2 == 0) coarse_states[k / 2] = state;
    }

    scan.times.resize(static_cast<std::size_t>(n));
    scan.h_values.resize(static_cast<std::size_t>(n));
    scan.i_values.resize(static_cast<std::size_t>(n));
    scan.j_values.resize(static_cast<std::size_t>(n));

    double cumulative = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::size_t k = 2 * static_cast<std::size_t>(i);
        scan.times[static_cast<std::size_t>(i)] =
            scan.t_end * static_cast<double>(k) / denom;
        if (i > 0) {
            const double dt = scan.times[static_cast<std::size_t>(i)] -
                              scan.times[static_cast<std::size_t>(i - 1)];
            cumulative += dt / 6.0 *
                          (integrand[k - 2] + 4.0 * integrand[k - 1] +
                           integrand[k]);
        }
        scan.i_values[static_cast<std::size_t>(i)] = cumulative;
        scan.h_values[static_cast<std::size_t>(i)] =
            g(coarse_states[static_cast<std::size_t>(i)]) * surv[k];
        scan.j_values[static_cast<std::size_t>(i)] =
            scan.h_values[static_cast<std::size_t>(i)] + cumulative;
    }

    scan.sup_j = scan.j_values[0];
    scan.arg_sup = scan.times[0];
    for (int i = 1; i < n; ++i) {
        if (scan.j_values[static_cast<std::size_t>(i)] > scan.sup_j) {
            scan.sup_j = scan.j_values[static_cast<std::size_t>(i)];
            scan.arg_sup = scan.times[static_cast<std::size_t>(i)];
        }
    }

    scan.k_integral = cumulative;
    if (scan.boundary) {
        scan.k_value =
            cumulative +
            kernel_expectation(model, w, coarse_states.back(), cfg) *
                surv[fine_count - 1];
        scan.truncation_bound = 0.0;
    } else {
        scan.truncation_bound = w.bound * surv[fine_count - 1];
        scan.k_value = cumulative + scan.truncation_bound;
    }
    return scan;
}

/// One value-iteration step: the best compromise between stopping at the
/// best grid time along the flow and waiting for the next jump.
struct LValue {
    double value = 0.0;
    double arg_sup = 0.0;
    double k_value = 0.0;
    double sup_j = 0.0;
    double truncation_bound = 0.0;
    double t_end = 0.0;
};

namespace detail {

/// Golden-section polish of t -> op_J around the best grid point.
inline std::pair<double, double> golden_refine(
    const PdmpModel& model, const BoundedFunction& w, const BoundedFunction& g,
    const HybridState& x, const SolverConfig& cfg, double lo, double hi) {
    constexpr double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = op_J(model, w, g, x, c, cfg);
    double fd = op_J(model, w, g, x, d, cfg);
    for (int it = 0; it < 40 && (b - a) > 1e-12 * std::max(1.0, hi); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = op_J(model, w, g, x, c, cfg);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = op_J(model, w, g, x, d, cfg);
        }
    }
    return fc > fd ? std::make_pair(c, fc) : std::make_pair(d, fd);
}

} // namespace detail

inline LValue op_L(const PdmpModel& model, const BoundedFunction& w,
                   const BoundedFunction& g, const HybridState& x,
                   const SolverConfig& cfg) {
    const GridScan scan = scan_grid(model, w, g, x, cfg);
    LValue out;
    out.sup_j = scan.sup_j;
    out.arg_sup = scan.arg_sup;
    out.k_value = scan.k_value;
    out.truncation_bound = scan.truncation_bound;
    out.t_end = scan.t_end;

    if (cfg.refine_sup) {
        const double step = scan.t_end / static_cast<double>(cfg.nbpt - 1);
        const double lo = std::max(0.0, scan.arg_sup - step);
        const double hi = std::min(scan.t_end, scan.arg_sup + step);
        const auto [t_ref, j_ref] =
            detail::golden_refine(model, w, g, x, cfg, lo, hi);
        if (j_ref > out.sup_j) {
            out.sup_j = j_ref;
            out.arg_sup = t_ref;
        }
    }

    out.value = std::max(out.sup_j, out.k_value);
    return out;
}

} // namespace pdmp
