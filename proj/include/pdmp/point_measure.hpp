#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pdmp {

/// One atom of a point measure: a location in R^d with a positive integer
/// multiplicity.
struct Atom {
    std::vector<double> location;
    std::int64_t multiplicity = 1;
};

namespace detail {

/// Locations compare equal under a relative tolerance of 1e-12 per
/// coordinate, absorbing floating-point drift from flow evaluation.
inline bool locations_equal(const std::vector<double>& a,
                            const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
        if (std::fabs(a[i] - b[i]) > 1e-12 * scale) return false;
    }
    return true;
}

inline bool location_less(const std::vector<double>& a,
                          const std::vector<double>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

} // namespace detail

/// A finite point measure: a finite sum of Dirac atoms with positive integer
/// multiplicities. Atoms are kept in canonical (lexicographic) order and
/// atoms at equal locations are merged, so equal measures have equal
/// representations. Instances are immutable after construction and safe to
/// share across threads.
class PointMeasure {
public:
    PointMeasure() = default;

    explicit PointMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        canonicalize();
    }

    static PointMeasure dirac(std::vector<double> location,
                              std::int64_t multiplicity = 1) {
        std::vector<Atom> a;
        a.push_back(Atom{std::move(location), multiplicity});
        return PointMeasure(std::move(a));
    }

    /// One-dimensional convenience: a Dirac mass at a scalar location.
    static PointMeasure dirac(double location, std::int64_t multiplicity = 1) {
        return dirac(std::vector<double>{location}, multiplicity);
    }

    [[nodiscard]] const std::vector<Atom>& atoms() const noexcept {
        return atoms_;
    }

    [[nodiscard]] bool empty() const noexcept { return atoms_.empty(); }

    [[nodiscard]] std::size_t atom_count() const noexcept {
        return atoms_.size();
    }

    /// Total mass, i.e. the number of points counted with multiplicity.
    [[nodiscard]] std::int64_t total_multiplicity() const noexcept {
        std::int64_t n = 0;
        for (const auto& a : atoms_) n += a.multiplicity;
        return n;
    }

    /// Integral of f against the measure: sum of multiplicity * f(location).
    template <typename F>
    [[nodiscard]] double integrate(F&& f) const {
        double acc = 0.0;
        for (const auto& a : atoms_) {
            acc += static_cast<double>(a.multiplicity) * f(a.location);
        }
        return acc;
    }

    /// Measure with `count` extra points at `location` (merging as needed).
    [[nodiscard]] PointMeasure plus(std::vector<double> location,
                                    std::int64_t count) const {
        std::vector<Atom> a = atoms_;
        a.push_back(Atom{std::move(location), count});
        return PointMeasure(std::move(a));
    }

    /// Measure with one point removed from the atom at `index`; the atom
    /// disappears when its multiplicity reaches zero.
    [[nodiscard]] PointMeasure minus_one_at(std::size_t index) const {
        if (index >= atoms_.size()) {
            throw std::invalid_argument("minus_one_at: atom index out of range");
        }
        std::vector<Atom> a = atoms_;
        if (a[index].multiplicity > 1) {
            a[index].multiplicity -= 1;
        } else {
            a.erase(a.begin() + static_cast<std::ptrdiff_t>(index));
        }
        PointMeasure out;
        out.atoms_ = std::move(a); // already canonical
        return out;
    }

    bool operator==(const PointMeasure& other) const {
        if (atoms_.size() != other.atoms_.size()) return false;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (atoms_[i].multiplicity != other.atoms_[i].multiplicity)
                return false;
            if (atoms_[i].location != other.atoms_[i].location) return false;
        }
        return true;
    }

    bool operator!=(const PointMeasure& other) const {
        return !(*this == other);
    }

private:
    void canonicalize() {
        for (const auto& a : atoms_) {
            if (a.multiplicity <= 0) {
                throw std::invalid_argument(
                    "PointMeasure: multiplicities must be strictly positive");
            }
        }
        std::sort(atoms_.begin(), atoms_.end(),
                  [](const Atom& a, const Atom& b) {
                      return detail::location_less(a.location, b.location);
                  });
        std::vector<Atom> merged;
        merged.reserve(atoms_.size());
        for (auto& a : atoms_) {
            if (!merged.empty() &&
                detail::locations_equal(merged.back().location, a.location)) {
                merged.back().multiplicity += a.multiplicity;
            } else {
                merged.push_back(std::move(a));
            }
        }
        atoms_ = std::move(merged);
    }

    std::vector<Atom> atoms_;
};

template <typename F>
double integrate(const PointMeasure& mu, F&& f) {
    return mu.integrate(std::forward<F>(f));
}

/// Hybrid state: a discrete mode paired with a point measure.
struct HybridState {
    int mode = 0;
    PointMeasure measure;

    bool operator==(const HybridState& other) const {
        return mode == other.mode && measure == other.measure;
    }
    bool operator!=(const HybridState& other) const {
        return !(*this == other);
    }
};

/// Canonical string key for a hybrid state, with locations rounded to 12
/// significant digits. Used for memoization and deterministic sub-streams.
inline std::string canonical_key(const HybridState& x) {
    std::string key = "m" + std::to_string(x.mode) + "|";
    char buf[40];
    for (const auto& a : x.measure.atoms()) {
        key += '(';
        for (std::size_t i = 0; i < a.location.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.12g", a.location[i]);
            if (i > 0) key += ',';
            key += buf;
        }
        key += ")x";
        key += std::to_string(a.multiplicity);
        key += ';';
    }
    return key;
}

/// A finite ordered family of test functions f_1, ..., f_m, each bounded by
/// one, weighted 2^{-k} in the vague distance. A finite family can only give
/// a pseudo-distance: atoms outside every support are invisible to it.
class TestFunctionBasis {
public:
    using Function = std::function<double(const std::vector<double>&)>;

    explicit TestFunctionBasis(std::vector<Function> functions)
        : functions_(std::move(functions)) {
        if (functions_.empty()) {
            throw std::invalid_argument("TestFunctionBasis: empty basis");
        }
    }

    [[nodiscard]] const std::vector<Function>& functions() const noexcept {
        return functions_;
    }

    [[nodiscard]] std::size_t size() const noexcept {
        return functions_.size();
    }

    /// Product tent functions on dyadic grids of levels 1..levels over the
    /// box [lo, hi]^dim. Each tent is continuous, compactly supported and
    /// bounded by one.
    static TestFunctionBasis dyadic_tents(double lo, double hi, int levels,
                                          std::size_t dim) {
        if (!(hi > lo) || levels < 1 || dim < 1) {
            throw std::invalid_argument("dyadic_tents: bad parameters");
        }
        std::vector<Function> fns;
        for (int level = 1; level <= levels; ++level) {
            const int cells = 1 << level;
            const double width = (hi - lo) / cells;
            std::vector<std::size_t> idx(dim, 0);
            const std::size_t centers = static_cast<std::size_t>(cells) + 1;
            // All grid points of the level-l lattice, one product tent each.
            while (true) {
                std::vector<double> center(dim);
                for (std::size_t j = 0; j < dim; ++j) {
                    center[j] = lo + static_cast<double>(idx[j]) * width;
                }
                fns.push_back([center, width](const std::vector<double>& y) {
                    if (y.size() != center.size()) return 0.0;
                    double v = 1.0;
                    for (std::size_t j = 0; j < center.size(); ++j) {
                        const double t =
                            1.0 - std::fabs(y[j] - center[j]) / width;
                        if (t <= 0.0) return 0.0;
                        v *= t;
                    }
                    return v;
                });
                std::size_t j = 0;
                while (j < dim && ++idx[j] == centers) {
                    idx[j] = 0;
                    ++j;
                }
                if (j == dim) break;
            }
        }
        return TestFunctionBasis(std::move(fns));
    }

private:
    std::vector<Function> functions_;
};

/// Distance between two point measures through the truncated basis:
/// sum_k 2^{-k} (1 - exp(-|mu f_k - nu f_k|)). Symmetric, bounded by
/// sum_k 2^{-k} < 1, zero on equal measures, and satisfies the triangle
/// inequality (each summand is subadditive in the integral gap).
inline double vague_distance(const PointMeasure& mu, const PointMeasure& nu,
                             const TestFunctionBasis& basis) {
    double acc = 0.0;
    double weight = 1.0;
    for (const auto& f : basis.functions()) {
        weight *= 0.5;
        const double gap = std::fabs(mu.integrate(f) - nu.integrate(f));
        acc += weight * (1.0 - std::exp(-gap));
    }
    return acc;
}

/// Distance on hybrid states: 1 when the modes differ (and only then);
/// otherwise (2/pi) * arctan of the vague distance, which stays below 1.
inline double hybrid_distance(const HybridState& x, const HybridState& y,
                              const TestFunctionBasis& basis) {
    if (x.mode != y.mode) return 1.0;
    constexpr double two_over_pi = 0.63661977236758134;
    return two_over_pi * std::atan(vague_distance(x.measure, y.measure, basis));
}

} // namespace pdmp
