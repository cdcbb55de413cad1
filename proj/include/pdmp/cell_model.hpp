#pragma once

#include "pdmp/model.hpp"
#include "pdmp/quadrature.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pdmp {

/// Parameters of the growth-division models: exponential growth rate r,
/// size-power intensity exponent alpha, and the reward cap gamma.
struct CellParams {
    double r = 2.0;
    double alpha = 1.0;
    double gamma = 1.0;

    void validate() const {
        if (!(r > 0.0) || !(alpha > 0.0) || !(gamma > 0.0)) {
            throw std::invalid_argument("CellParams: r, alpha, gamma must be > 0");
        }
    }
};

namespace cell_detail {

/// Sum of multiplicity * size^alpha; the total division intensity. The size
/// is the first coordinate of each atom, so the same sum serves the plain
/// and the time-augmented state spaces.
inline double intensity_sum(const PointMeasure& measure, double alpha) {
    double acc = 0.0;
    for (const auto& a : measure.atoms()) {
        acc += static_cast<double>(a.multiplicity) *
               std::pow(a.location[0], alpha);
    }
    return acc;
}

/// Closed-form cumulative hazard A (e^{r alpha t} - 1) / (alpha r).
inline double hazard_closed_form(double intensity0, double r, double alpha,
                                 double t) {
    return intensity0 * std::expm1(r * alpha * t) / (alpha * r);
}

/// Closed-form inverse of u = exp(-Lambda(t)); +infinity when the intensity
/// vanishes (an empty population never divides).
inline double jump_time_closed_form(double intensity0, double r, double alpha,
                                    double u) {
    if (intensity0 <= 0.0) return kInfiniteTime;
    return std::log1p(alpha * r * (-std::log(u)) / intensity0) / (r * alpha);
}

/// f(y) = (y - gamma) 1{y < gamma} + gamma, i.e. the size capped at gamma.
inline double capped(double y, double gamma) {
    return y < gamma ? y : gamma;
}

inline void register_closed_forms(PdmpModel& model, double r, double alpha) {
    model.hazard = [r, alpha](const HybridState& x, double t) {
        return hazard_closed_form(intensity_sum(x.measure, alpha), r, alpha, t);
    };
    model.jump_time_inverse = [r, alpha](const HybridState& x, double u) {
        return jump_time_closed_form(intensity_sum(x.measure, alpha), r, alpha,
                                     u);
    };
}

} // namespace cell_detail

/// Single tracked cell: scalar size growing exponentially, division
/// intensity size^alpha, division replaces the cell by one daughter of half
/// its size. States are one-atom measures of total multiplicity one.
inline PdmpModel single_cell_model(const CellParams& params) {
    params.validate();
    const double r = params.r;
    const double alpha = params.alpha;

    PdmpModel model;
    model.flow = [r](const HybridState& x, double t) {
        std::vector<Atom> atoms;
        atoms.reserve(x.measure.atom_count());
        const double growth = std::exp(r * t);
        for (const auto& a : x.measure.atoms()) {
            atoms.push_back(Atom{{a.location[0] * growth}, a.multiplicity});
        }
        return HybridState{x.mode, PointMeasure(std::move(atoms))};
    };
    model.intensity = [alpha](const HybridState& x) {
        return cell_detail::intensity_sum(x.measure, alpha);
    };
    model.exit_time = [](const HybridState&) { return kInfiniteTime; };
    model.kernel.enumerate = [](const HybridState& y) {
        if (y.measure.total_multiplicity() != 1) {
            throw std::runtime_error(
                "single_cell_model: state must hold exactly one cell");
        }
        const double size = y.measure.atoms()[0].location[0];
        return std::vector<JumpOutcome>{
            {HybridState{y.mode, PointMeasure::dirac(size / 2.0)}, 1.0}};
    };
    cell_detail::register_closed_forms(model, r, alpha);
    return model;
}

/// Whole-population model: every cell grows exponentially; a division
/// removes one cell and adds two cells of half its size, the divider chosen
/// proportionally to its intensity share.
inline PdmpModel population_model(const CellParams& params) {
    params.validate();
    const double r = params.r;
    const double alpha = params.alpha;

    PdmpModel model;
    model.flow = [r](const HybridState& x, double t) {
        std::vector<Atom> atoms;
        atoms.reserve(x.measure.atom_count());
        const double growth = std::exp(r * t);
        for (const auto& a : x.measure.atoms()) {
            atoms.push_back(Atom{{a.location[0] * growth}, a.multiplicity});
        }
        return HybridState{x.mode, PointMeasure(std::move(atoms))};
    };
    model.intensity = [alpha](const HybridState& x) {
        return cell_detail::intensity_sum(x.measure, alpha);
    };
    model.exit_time = [](const HybridState&) { return kInfiniteTime; };
    model.kernel.enumerate = [alpha](const HybridState& y) {
        const auto& atoms = y.measure.atoms();
        if (atoms.empty()) {
            throw std::runtime_error("population_model: empty population");
        }
        const double total = cell_detail::intensity_sum(y.measure, alpha);
        std::vector<JumpOutcome> outcomes;
        outcomes.reserve(atoms.size());
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            const double size = atoms[j].location[0];
            const double weight = static_cast<double>(atoms[j].multiplicity) *
                                  std::pow(size, alpha) / total;
            PointMeasure split =
                y.measure.minus_one_at(j).plus({size / 2.0}, 2);
            outcomes.push_back(
                JumpOutcome{HybridState{y.mode, std::move(split)}, weight});
        }
        return outcomes;
    };
    cell_detail::register_closed_forms(model, r, alpha);
    return model;
}

/// Population model with a clock coordinate carried by each cell: atoms are
/// (size, clock), the flow advances both, the intensity ignores clocks and a
/// division clones the clock. Starting all cells with one common clock keeps
/// it common along the whole path.
inline PdmpModel time_augmented_population_model(const CellParams& params) {
    params.validate();
    const double r = params.r;
    const double alpha = params.alpha;

    PdmpModel model;
    model.flow = [r](const HybridState& x, double t) {
        std::vector<Atom> atoms;
        atoms.reserve(x.measure.atom_count());
        const double growth = std::exp(r * t);
        for (const auto& a : x.measure.atoms()) {
            atoms.push_back(Atom{{a.location[0] * growth, a.location[1] + t},
                                 a.multiplicity});
        }
        return HybridState{x.mode, PointMeasure(std::move(atoms))};
    };
    model.intensity = [alpha](const HybridState& x) {
        return cell_detail::intensity_sum(x.measure, alpha);
    };
    model.exit_time = [](const HybridState&) { return kInfiniteTime; };
    model.kernel.enumerate = [alpha](const HybridState& y) {
        const auto& atoms = y.measure.atoms();
        if (atoms.empty()) {
            throw std::runtime_error(
                "time_augmented_population_model: empty population");
        }
        const double total = cell_detail::intensity_sum(y.measure, alpha);
        std::vector<JumpOutcome> outcomes;
        outcomes.reserve(atoms.size());
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            const double size = atoms[j].location[0];
            const double clock = atoms[j].location[1];
            const double weight = static_cast<double>(atoms[j].multiplicity) *
                                  std::pow(size, alpha) / total;
            PointMeasure split =
                y.measure.minus_one_at(j).plus({size / 2.0, clock}, 2);
            outcomes.push_back(
                JumpOutcome{HybridState{y.mode, std::move(split)}, weight});
        }
        return outcomes;
    };
    cell_detail::register_closed_forms(model, r, alpha);
    return model;
}

/// Initial time-augmented state: the given sizes, all with clock zero.
inline HybridState augmented_initial_state(const std::vector<double>& sizes,
                                           int mode = 0) {
    std::vector<Atom> atoms;
    atoms.reserve(sizes.size());
    for (double s : sizes) atoms.push_back(Atom{{s, 0.0}, 1});
    return HybridState{mode, PointMeasure(std::move(atoms))};
}

inline HybridState population_initial_state(const std::vector<double>& sizes,
                                            int mode = 0) {
    std::vector<Atom> atoms;
    atoms.reserve(sizes.size());
    for (double s : sizes) atoms.push_back(Atom{{s}, 1});
    return HybridState{mode, PointMeasure(std::move(atoms))};
}

/// Reward on the time-augmented population: exp(-r t) times the sum over
/// cells of the size capped at gamma, where t is the common clock. Requires
/// all atoms to share one clock; the time-augmented kernel preserves this.
inline RewardFunction discounted_capped_size_reward(const CellParams& params,
                                                    double bound) {
    params.validate();
    const double r = params.r;
    const double gamma = params.gamma;
    return RewardFunction{
        [r, gamma](const HybridState& x) {
            const auto& atoms = x.measure.atoms();
            if (atoms.empty()) return 0.0;
            const double clock = atoms[0].location[1];
            double total = 0.0;
            for (const auto& a : atoms) {
                if (a.location.size() != 2) {
                    throw std::invalid_argument(
                        "reward: atoms must be (size, clock) pairs");
                }
                if (std::fabs(a.location[1] - clock) > 1e-9) {
                    throw std::invalid_argument(
                        "reward: atoms carry differing clocks");
                }
                total += static_cast<double>(a.multiplicity) *
                         cell_detail::capped(a.location[0], gamma);
            }
            return std::exp(-r * clock) * total;
        },
        bound};
}

/// Reward of the population immediately after its first division, as an
/// explicit function of the pre-division sizes, the index of the divider and
/// the division time. Algebraically identical to evaluating the discounted
/// capped-size reward on the constructed post-division state.
inline double reward_after_first_split(const std::vector<double>& sizes,
                                       std::size_t split_index, double t1,
                                       const CellParams& params) {
    params.validate();
    if (split_index >= sizes.size()) {
        throw std::invalid_argument("reward_after_first_split: bad index");
    }
    if (t1 < 0.0) {
        throw std::invalid_argument("reward_after_first_split: t1 < 0");
    }
    const double growth = std::exp(params.r * t1);
    const double gamma = params.gamma;
    double bracket =
        static_cast<double>(sizes.size() + 1) * gamma;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double grown = sizes[i] * growth;
        if (i == split_index) {
            if (grown < 2.0 * gamma) bracket += grown - 2.0 * gamma;
        } else {
            if (grown < gamma) bracket += grown - gamma;
        }
    }
    return std::exp(-params.r * t1) * bracket;
}

namespace cell_detail {

/// Truncation horizon by the survivor-quantile rule, using the closed-form
/// hazard of the growth-division dynamics.
inline double direct_horizon(double intensity0, const CellParams& p,
                             const SolverConfig& cfg) {
    const auto below = [&](double t) {
        return std::exp(-hazard_closed_form(intensity0, p.r, p.alpha, t)) <
               cfg.survivor_cutoff;
    };
    double hi = std::min(1.0, cfg.t_max);
    while (hi < cfg.t_max && !below(hi)) hi = std::min(2.0 * hi, cfg.t_max);
    if (!below(hi)) return cfg.t_max;
    return bisect_first_true(below, 0.0, hi, 1e-6 * hi);
}

/// Cumulative composite Simpson over a uniform fine grid (values at the
/// coarse points and panel midpoints); returns the integral at each coarse
/// point.
inline std::vector<double> cumulative_simpson(const std::vector<double>& fine,
                                              double t_end) {
    const std::size_t coarse = (fine.size() + 1) / 2;
    std::vector<double> out(coarse, 0.0);
    const double denom = static_cast<double>(fine.size() - 1);
    double acc = 0.0;
    for (std::size_t i = 1; i < coarse; ++i) {
        const double lo = t_end * static_cast<double>(2 * i - 2) / denom;
        const double hi = t_end * static_cast<double>(2 * i) / denom;
        acc += (hi - lo) / 6.0 *
               (fine[2 * i - 2] + 4.0 * fine[2 * i - 1] + fine[2 * i]);
        out[i] = acc;
    }
    return out;
}

} // namespace cell_detail

/// Deterministic one-jump value of the population problem computed from the
/// explicit post-division reward: the supremum over the time grid of the
/// jump-before-t expectation (quadrature over the division-time density,
/// exact enumeration of the divider) plus the no-division term, taken
/// against the expectation of the post-division reward. This is an
/// independent route from the operator solver and must agree with it.
struct OneJumpValue {
    double value = 0.0;
    double arg_sup = 0.0;
    double sup_j = 0.0;
    double k_value = 0.0;
    double truncation_bound = 0.0;
    double t_end = 0.0;
};

inline OneJumpValue direct_one_jump_value(const std::vector<double>& sizes,
                                          const CellParams& params,
                                          const SolverConfig& cfg) {
    params.validate();
    cfg.validate();
    if (sizes.empty()) {
        throw std::invalid_argument("direct_one_jump_value: no cells");
    }
    const double r = params.r;
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const std::size_t n = sizes.size();

    double a_total = 0.0;
    std::vector<double> weights(n);
    for (std::size_t j = 0; j < n; ++j) {
        weights[j] = std::pow(sizes[j], alpha);
        a_total += weights[j];
    }

    OneJumpValue out;
    out.t_end = cell_detail::direct_horizon(a_total, params, cfg);

    const std::size_t fine_count = 2 * static_cast<std::size_t>(cfg.nbpt - 1) + 1;
    const double denom = static_cast<double>(fine_count - 1);

    std::vector<double> fine(fine_count);
    std::vector<double> surv_coarse(static_cast<std::size_t>(cfg.nbpt));
    for (std::size_t k = 0; k < fine_count; ++k) {
        const double s = out.t_end * static_cast<double>(k) / denom;
        const double hazard =
            cell_detail::hazard_closed_form(a_total, r, alpha, s);
        const double surv = std::exp(-hazard);
        const double density = a_total * std::exp(r * alpha * s) * surv;
        double mean_post = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mean_post += weights[j] / a_total *
                         reward_after_first_split(sizes, j, s, params);
        }
        fine[k] = density * mean_post;
        if (k % 2 == 0) surv_coarse[k / 2] = surv;
    }

    const std::vector<double> jump_term =
        cell_detail::cumulative_simpson(fine, out.t_end);

    out.sup_j = -1.0;
    for (std::size_t i = 0; i < jump_term.size(); ++i) {
        const double t = out.t_end * static_cast<double>(2 * i) / denom;
        const double growth = std::exp(r * t);
        double stay = static_cast<double>(n) * gamma;
        for (double size : sizes) {
            const double grown = size * growth;
            if (grown < gamma) stay += grown - gamma;
        }
        const double objective =
            jump_term[i] + std::exp(-r * t) * stay * surv_coarse[i];
        if (objective > out.sup_j) {
            out.sup_j = objective;
            out.arg_sup = t;
        }
    }

    out.truncation_bound =
        static_cast<double>(n + 1) * gamma * surv_coarse.back();
    out.k_value = jump_term.back() + out.truncation_bound;
    out.value = std::max(out.sup_j, out.k_value);
    return out;
}

/// Monte Carlo variant of the one-jump population value: the inner
/// expectation is replaced by empirical means over sampled (division time,
/// divider) pairs before the supremum is taken, on the same deterministic
/// time grid. Reported with the standard error of the selected branch.
struct McValue {
    double value = 0.0;
    double arg_sup = 0.0;
    double standard_error = 0.0;
    std::size_t samples = 0;
};

inline McValue one_jump_value_monte_carlo(const std::vector<double>& sizes,
                                          const CellParams& params,
                                          const SolverConfig& cfg,
                                          std::size_t n_samples,
                                          RngStream rng) {
    params.validate();
    cfg.validate();
    if (sizes.empty() || n_samples < 2) {
        throw std::invalid_argument("one_jump_value_monte_carlo: bad inputs");
    }
    const double r = params.r;
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const std::size_t n = sizes.size();

    double a_total = 0.0;
    std::vector<double> weights(n);
    for (std::size_t j = 0; j < n; ++j) {
        weights[j] = std::pow(sizes[j], alpha);
        a_total += weights[j];
    }

    struct Draw {
        double t;
        double v0;
    };
    std::vector<Draw> draws(n_samples);
    for (auto& d : draws) {
        const double u = rng.uniform_open01();
        d.t = cell_detail::jump_time_closed_form(a_total, r, alpha, u);
        const std::size_t j = rng.categorical(weights.data(), n, a_total);
        d.v0 = reward_after_first_split(sizes, j, d.t, params);
    }
    std::sort(draws.begin(), draws.end(),
              [](const Draw& a, const Draw& b) { return a.t < b.t; });

    std::vector<double> prefix(n_samples + 1, 0.0);
    std::vector<double> prefix_sq(n_samples + 1, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
        prefix[i + 1] = prefix[i] + draws[i].v0;
        prefix_sq[i + 1] = prefix_sq[i] + draws[i].v0 * draws[i].v0;
    }

    const double t_end = cell_detail::direct_horizon(a_total, params, cfg);
    const double inv_n = 1.0 / static_cast<double>(n_samples);

    McValue out;
    out.samples = n_samples;
    double sup = -1.0;
    double arg_sup = 0.0;
    std::size_t cut_at_sup = 0;
    std::size_t cut = 0;
    for (int i = 0; i < cfg.nbpt; ++i) {
        const double t =
            t_end * static_cast<double>(i) / static_cast<double>(cfg.nbpt - 1);
        while (cut < n_samples && draws[cut].t <= t) ++cut;
        const double growth = std::exp(r * t);
        double stay = static_cast<double>(n) * gamma;
        for (double size : sizes) {
            const double grown = size * growth;
            if (grown < gamma) stay += grown - gamma;
        }
        const double surv = std::exp(
            -cell_detail::hazard_closed_form(a_total, r, alpha, t));
        const double objective =
            prefix[cut] * inv_n + std::exp(-r * t) * stay * surv;
        if (objective > sup) {
            sup = objective;
            arg_sup = t;
            cut_at_sup = cut;
        }
    }

    const double k_mean = prefix[n_samples] * inv_n;
    const auto stderr_of = [&](std::size_t cut_count) {
        const double mean = prefix[cut_count] * inv_n;
        const double mean_sq = prefix_sq[cut_count] * inv_n;
        const double var = std::max(0.0, mean_sq - mean * mean) *
                           static_cast<double>(n_samples) /
                           static_cast<double>(n_samples - 1);
        return std::sqrt(var * inv_n);
    };

    if (k_mean > sup) {
        out.value = k_mean;
        out.arg_sup = t_end;
        out.standard_error = stderr_of(n_samples);
    } else {
        out.value = sup;
        out.arg_sup = arg_sup;
        out.standard_error = stderr_of(cut_at_sup);
    }
    return out;
}

/// Value functions of the tagged single-cell problem, from the explicit
/// one-jump display: level zero is the capped size itself; level one is the
/// supremum over the grid of the stay term (capped grown size times the
/// survivor) plus the expectation of the capped post-division size before t,
/// taken against the expectation of the level-zero value at the post-jump
/// state. Implemented verbatim; no discount appears in the tagged problem.
struct TaggedCellValue {
    double v1 = 0.0;
    double arg_sup = 0.0;
    double sup_j = 0.0;
    double k_value = 0.0;
    double t_end = 0.0;
    std::function<double(double)> v0;
};

inline TaggedCellValue tagged_cell_value(double size, const CellParams& params,
                                         const SolverConfig& cfg) {
    params.validate();
    cfg.validate();
    if (!(size > 0.0)) {
        throw std::invalid_argument("tagged_cell_value: size must be > 0");
    }
    const double r = params.r;
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const double a0 = std::pow(size, alpha);

    TaggedCellValue out;
    out.v0 = [gamma](double y) { return cell_detail::capped(y, gamma); };
    out.t_end = cell_detail::direct_horizon(a0, params, cfg);

    const std::size_t fine_count = 2 * static_cast<std::size_t>(cfg.nbpt - 1) + 1;
    const double denom = static_cast<double>(fine_count - 1);

    std::vector<double> fine(fine_count);
    std::vector<double> surv_coarse(static_cast<std::size_t>(cfg.nbpt));
    for (std::size_t k = 0; k < fine_count; ++k) {
        const double s = out.t_end * static_cast<double>(k) / denom;
        const double surv = std::exp(
            -cell_detail::hazard_closed_form(a0, r, alpha, s));
        const double density = a0 * std::exp(r * alpha * s) * surv;
        const double grown = size * std::exp(r * s);
        double bracket = gamma;
        if (grown < 2.0 * gamma) bracket += grown / 2.0 - gamma;
        fine[k] = density * bracket;
        if (k % 2 == 0) surv_coarse[k / 2] = surv;
    }

    const std::vector<double> jump_term =
        cell_detail::cumulative_simpson(fine, out.t_end);

    out.sup_j = -1.0;
    for (std::size_t i = 0; i < jump_term.size(); ++i) {
        const double t = out.t_end * static_cast<double>(2 * i) / denom;
        const double grown = size * std::exp(r * t);
        double stay = gamma;
        if (grown < gamma) stay += grown - gamma;
        const double objective = stay * surv_coarse[i] + jump_term[i];
        if (objective > out.sup_j) {
            out.sup_j = objective;
            out.arg_sup = t;
        }
    }

    out.k_value = jump_term.back() + gamma * surv_coarse.back();
    out.v1 = std::max(out.sup_j, out.k_value);
    return out;
}

/// Monte Carlo variant of the tagged one-jump value, mirroring the
/// population estimator: empirical means over sampled division times on the
/// deterministic grid, then the supremum.
inline McValue tagged_cell_value_monte_carlo(double size,
                                             const CellParams& params,
                                             const SolverConfig& cfg,
                                             std::size_t n_samples,
                                             RngStream rng) {
    params.validate();
    cfg.validate();
    if (!(size > 0.0) || n_samples < 2) {
        throw std::invalid_argument("tagged_cell_value_monte_carlo: bad inputs");
    }
    const double r = params.r;
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const double a0 = std::pow(size, alpha);

    struct Draw {
        double t;
        double value;
    };
    std::vector<Draw> draws(n_samples);
    for (auto& d : draws) {
        const double u = rng.uniform_open01();
        d.t = cell_detail::jump_time_closed_form(a0, r, alpha, u);
        const double grown = size * std::exp(r * d.t);
        double bracket = gamma;
        if (grown < 2.0 * gamma) bracket += grown / 2.0 - gamma;
        d.value = bracket;
    }
    std::sort(draws.begin(), draws.end(),
              [](const Draw& a, const Draw& b) { return a.t < b.t; });

    std::vector<double> prefix(n_samples + 1, 0.0);
    std::vector<double> prefix_sq(n_samples + 1, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
        prefix[i + 1] = prefix[i] + draws[i].value;
        prefix_sq[i + 1] = prefix_sq[i] + draws[i].value * draws[i].value;
    }

    const double t_end = cell_detail::direct_horizon(a0, params, cfg);
    const double inv_n = 1.0 / static_cast<double>(n_samples);

    McValue out;
    out.samples = n_samples;
    double sup = -1.0;
    double arg_sup = 0.0;
    std::size_t cut_at_sup = 0;
    std::size_t cut = 0;
    for (int i = 0; i < cfg.nbpt; ++i) {
        const double t =
            t_end * static_cast<double>(i) / static_cast<double>(cfg.nbpt - 1);
        while (cut < n_samples && draws[cut].t <= t) ++cut;
        const double grown = size * std::exp(r * t);
        double stay = gamma;
        if (grown < gamma) stay += grown - gamma;
        const double surv =
            std::exp(-cell_detail::hazard_closed_form(a0, r, alpha, t));
        const double objective = stay * surv + prefix[cut] * inv_n;
        if (objective > sup) {
            sup = objective;
            arg_sup = t;
            cut_at_sup = cut;
        }
    }

    const double k_mean = prefix[n_samples] * inv_n;
    const auto stderr_of = [&](std::size_t cut_count) {
        const double mean = prefix[cut_count] * inv_n;
        const double mean_sq = prefix_sq[cut_count] * inv_n;
        const double var = std::max(0.0, mean_sq - mean * mean) *
                           static_cast<double>(n_samples) /
                           static_cast<double>(n_samples - 1);
        return std::sqrt(var * inv_n);
    };

    if (k_mean > sup) {
        out.value = k_mean;
        out.arg_sup = t_end;
        out.standard_error = stderr_of(n_samples);
    } else {
        out.value = sup;
        out.arg_sup = arg_sup;
        out.standard_error = stderr_of(cut_at_sup);
    }
    return out;
}

/// Monte Carlo estimate of the discounted population functional
/// E[exp(-r t) X_t(h)]: simulate to the horizon, integrate h against the
/// empirical measure and discount. Replications whose simulation was
/// truncated by the explosion guard before t are excluded and counted.
struct FunctionalEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t included = 0;
    std::size_t excluded = 0;
};

inline FunctionalEstimate discounted_population_functional(
    const PdmpModel& model, const HybridState& x0,
    const std::function<double(const std::vector<double>&)>& h, double t,
    std::size_t replications, double discount_rate, std::uint64_t seed,
    std::uint64_t stream_base = 0) {
    if (t < 0.0 || replications < 1) {
        throw std::invalid_argument(
            "discounted_population_functional: bad inputs");
    }
    std::vector<double> values;
    values.reserve(replications);
    std::size_t excluded = 0;
    const double discount = std::exp(-discount_rate * t);
    for (std::size_t i = 0; i < replications; ++i) {
        const Trajectory traj = simulate(model, x0, StopRule::at_time(t),
                                         RngStream(seed, stream_base + i));
        if (traj.truncated && traj.horizon < t) {
            ++excluded;
            continue;
        }
        const HybridState state = state_at(traj, model, t);
        values.push_back(discount * state.measure.integrate(h));
    }

    FunctionalEstimate out;
    out.included = values.size();
    out.excluded = excluded;
    if (values.empty()) return out;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    out.mean = mean;
    if (values.size() > 1) {
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size() - 1);
        out.standard_error = std::sqrt(var / static_cast<double>(values.size()));
    }
    return out;
}

} // namespace pdmp
