#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace pdmp {

/// Thrown when a numerical routine cannot reach its requested tolerance.
/// Carries the error estimate that was actually achieved.
class numeric_error : public std::runtime_error {
public:
    numeric_error(const std::string& what, double achieved)
        : std::runtime_error(what + " (achieved error estimate " +
                             std::to_string(achieved) + ")"),
          achieved_(achieved) {}

    [[nodiscard]] double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

namespace detail {

inline constexpr std::size_t kMaxQuadPanels = std::size_t{1} << 20;
inline constexpr int kMaxQuadDepth = 48;

template <typename F>
double simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth, std::size_t& panels,
                   double& achieved) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double h6 = (b - a) / 12.0;
    const double left = h6 * (fa + 4.0 * flm + fm);
    const double right = h6 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;

    if (std::fabs(delta) <= 15.0 * tol || depth >= kMaxQuadDepth ||
        panels >= kMaxQuadPanels) {
        achieved += std::fabs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    panels += 2;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, panels,
                       achieved) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1,
                       panels, achieved);
}

} // namespace detail

/// Adaptive Simpson integration of f over [a, b] to absolute tolerance.
/// Throws numeric_error when the subdivision budget is exhausted before the
/// estimate meets the tolerance.
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol) {
    if (!(b > a)) return 0.0;
    const double fa = f(a);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    std::size_t panels = 2;
    double achieved = 0.0;
    const double value = detail::simpson_rec(f, a, b, fa, fm, fb, whole,
                                             abs_tol, 0, panels, achieved);
    if (achieved > 10.0 * abs_tol) {
        throw numeric_error("adaptive_simpson did not converge", achieved);
    }
    return value;
}

/// Bisection for the smallest t in [lo, hi] with predicate(t) true, assuming
/// predicate is false at lo, true at hi, and monotone. Absolute tolerance on t.
template <typename Pred>
double bisect_first_true(Pred&& predicate, double lo, double hi, double tol) {
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (predicate(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

} // namespace pdmp
