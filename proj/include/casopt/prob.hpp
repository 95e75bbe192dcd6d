// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite-alphabet probability primitives: grids, probability vectors,
// conditional laws, entropy, mutual information and Bayes posteriors.
//
// Internally everything is in nats; the public information measures
// (entropy, mutual_information) report bits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "casopt/errors.hpp"

namespace casopt {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLn2 = std::numbers::ln2;

inline double nats_to_bits(double nats) { return nats / kLn2; }
inline double bits_to_nats(double bits) { return bits * kLn2; }

/// Ordered sample points of a discretized alphabet.
class Grid {
public:
    explicit Grid(std::vector<double> points) : points_(std::move(points)) {
        if (points_.size() < 2) throw InvalidArgument("grid needs at least 2 points");
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!std::isfinite(points_[i])) throw InvalidArgument("grid point is not finite");
            if (i > 0 && !(points_[i] > points_[i - 1]))
                throw InvalidArgument("grid points must be strictly increasing");
        }
    }

    /// `count` equally spaced points on [lo, hi].
    static Grid uniform(double lo, double hi, std::size_t count) {
        if (count < 2) throw InvalidArgument("grid needs at least 2 points");
        if (!(hi > lo)) throw InvalidArgument("grid upper bound must exceed lower bound");
        std::vector<double> pts(count);
        const double step = (hi - lo) / static_cast<double>(count - 1);
        for (std::size_t i = 0; i < count; ++i) pts[i] = lo + step * static_cast<double>(i);
        pts.back() = hi;
        return Grid(std::move(pts));
    }

    /// Symmetric grid on [-half_width, half_width].
    static Grid symmetric(double half_width, std::size_t count) {
        Grid g = uniform(-half_width, half_width, count);
        // Mirror the lower half so that the grid is exactly symmetric and 0 is exact for odd counts.
        const std::size_t n = g.points_.size();
        for (std::size_t i = 0; i < n / 2; ++i) g.points_[n - 1 - i] = -g.points_[i];
        if (n % 2 == 1) g.points_[n / 2] = 0.0;
        return g;
    }

    std::size_t size() const noexcept { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    double min() const noexcept { return points_.front(); }
    double max() const noexcept { return points_.back(); }
    std::span<const double> points() const noexcept { return points_; }

    /// Bin edges at midpoints between neighbours; outer edges sit half a spacing beyond the ends.
    std::vector<double> edges() const {
        const std::size_t n = points_.size();
        std::vector<double> e(n + 1);
        for (std::size_t i = 1; i < n; ++i) e[i] = 0.5 * (points_[i - 1] + points_[i]);
        e[0] = points_[0] - 0.5 * (points_[1] - points_[0]);
        e[n] = points_[n - 1] + 0.5 * (points_[n - 1] - points_[n - 2]);
        return e;
    }

    /// Index of the nearest grid point (ties resolve downward).
    std::size_t nearest(double value) const {
        auto it = std::lower_bound(points_.begin(), points_.end(), value);
        if (it == points_.begin()) return 0;
        if (it == points_.end()) return points_.size() - 1;
        const auto hi = static_cast<std::size_t>(it - points_.begin());
        return (points_[hi] - value < value - points_[hi - 1]) ? hi : hi - 1;
    }

private:
    std::vector<double> points_;
};

/// Probability vector aligned with a grid.
class Pmf {
public:
    Pmf() = default;

    /// Takes `mass` as is after validation; use `normalize` for raw weights.
    explicit Pmf(Vector mass, double tol = 1e-12) : mass_(std::move(mass)) {
        if (mass_.size() == 0) throw DegeneratePmf("empty probability vector");
        for (Eigen::Index i = 0; i < mass_.size(); ++i)
            if (!(mass_[i] >= 0.0) || !std::isfinite(mass_[i]))
                throw DegeneratePmf("probability entries must be finite and non-negative");
        if (std::abs(mass_.sum() - 1.0) > tol) throw DegeneratePmf("probability vector does not sum to 1");
    }

    static Pmf uniform(std::size_t n) {
        return Pmf(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
    }

    static Pmf point_mass(std::size_t n, std::size_t at) {
        Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
        v[static_cast<Eigen::Index>(at)] = 1.0;
        return Pmf(std::move(v));
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(mass_.size()); }
    double operator[](std::size_t i) const { return mass_[static_cast<Eigen::Index>(i)]; }
    const Vector& mass() const noexcept { return mass_; }

    double expectation(std::span<const double> f) const {
        if (f.size() != size()) throw DimensionMismatch("expectation: function length differs from pmf");
        double acc = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) acc += mass_[static_cast<Eigen::Index>(i)] * f[i];
        return acc;
    }

    double expectation(const Vector& f) const {
        if (f.size() != mass_.size()) throw DimensionMismatch("expectation: function length differs from pmf");
        return mass_.dot(f);
    }

private:
    Vector mass_;
};

/// Rescales a non-negative vector to unit mass.
inline Pmf normalize(const Vector& raw) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        if (raw[i] < 0.0 || !std::isfinite(raw[i])) throw DegeneratePmf("normalize: negative or non-finite entry");
        total += raw[i];
    }
    if (!(total > 0.0)) throw DegeneratePmf("normalize: no strictly positive entry");
    Vector out = raw / total;
    // A second pass removes the residual rounding of the first division.
    out /= out.sum();
    return Pmf(std::move(out));
}

inline Pmf normalize(std::span<const double> raw) {
    return normalize(Vector(Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()))));
}

/// Channel law: entry (i, j) is the probability of output j given input i.
class CondPmf {
public:
    CondPmf() = default;

    explicit CondPmf(RowMatrix rows, double tol = 1e-10) : rows_(std::move(rows)) {
        if (rows_.rows() == 0 || rows_.cols() == 0) throw DimensionMismatch("empty channel law");
        for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
            double s = 0.0;
            for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
                const double v = rows_(i, j);
                if (!(v >= 0.0) || !std::isfinite(v)) throw DegeneratePmf("channel law entry must be non-negative");
                s += v;
            }
            if (std::abs(s - 1.0) > tol) throw DegeneratePmf("channel law row " + std::to_string(i) + " does not sum to 1");
        }
    }

    /// Normalizes each row of a non-negative matrix.
    static CondPmf from_weights(RowMatrix weights) {
        for (Eigen::Index i = 0; i < weights.rows(); ++i) {
            const double s = weights.row(i).sum();
            if (!(s > 0.0)) throw DegeneratePmf("channel law row " + std::to_string(i) + " has no mass");
            weights.row(i) /= s;
        }
        return CondPmf(std::move(weights));
    }

    static CondPmf identity(std::size_t n) {
        return CondPmf(RowMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    }

    std::size_t inputs() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
    std::size_t outputs() const noexcept { return static_cast<std::size_t>(rows_.cols()); }
    double operator()(std::size_t in, std::size_t out) const {
        return rows_(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    }
    const RowMatrix& rows() const noexcept { return rows_; }

    /// Output marginal under `p_in`.
    Vector marginal(const Pmf& p_in) const {
        check_input(p_in);
        return rows_.transpose() * p_in.mass();
    }

    void check_input(const Pmf& p_in) const {
        if (p_in.size() != inputs()) throw DimensionMismatch("input pmf length differs from channel input count");
    }

private:
    RowMatrix rows_;
};

/// Shannon entropy in bits; 0 log 0 = 0.
inline double entropy(const Pmf& p) {
    double h = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    return nats_to_bits(h);
}

namespace detail {

/// Per-input divergence D(Q(.|x) || q_out) in nats, skipping zero-probability outputs.
inline Vector row_divergences(const RowMatrix& law, const Vector& out_marginal) {
    Vector d(law.rows());
    for (Eigen::Index i = 0; i < law.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < law.cols(); ++j) {
            const double q = law(i, j);
            if (q > 0.0) acc += q * std::log(q / out_marginal[j]);
        }
        d[i] = acc;
    }
    return d;
}

inline double mutual_information_nats(const Vector& p_in, const RowMatrix& law) {
    const Vector out = law.transpose() * p_in;
    const Vector d = row_divergences(law, out);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p_in.size(); ++i)
        if (p_in[i] > 0.0) acc += p_in[i] * d[i];
    return std::max(acc, 0.0);
}

}  // namespace detail

/// I(X;Y) in bits for input `p_in` through `law`.
inline double mutual_information(const Pmf& p_in, const CondPmf& law) {
    law.check_input(p_in);
    return nats_to_bits(detail::mutual_information_nats(p_in.mass(), law.rows()));
}

/// Posterior law of the input given the output. Row j of the result is P(in | out = j).
struct Posterior {
    CondPmf law;                  // outputs x inputs; unreachable rows hold the prior
    std::vector<bool> reachable;  // false where the output marginal is zero

    bool is_reachable(std::size_t out) const { return reachable[out]; }
};

inline Posterior bayes_posterior(const Pmf& prior, const CondPmf& law) {
    law.check_input(prior);
    const Vector out = law.marginal(prior);
    const auto n_in = static_cast<Eigen::Index>(law.inputs());
    const auto n_out = static_cast<Eigen::Index>(law.outputs());
    RowMatrix post(n_out, n_in);
    std::vector<bool> reachable(static_cast<std::size_t>(n_out), true);
    for (Eigen::Index j = 0; j < n_out; ++j) {
        if (!(out[j] > 0.0)) {
            // Placeholder row so that the law stays stochastic; consumers must skip it.
            post.row(j) = prior.mass().transpose();
            reachable[static_cast<std::size_t>(j)] = false;
            continue;
        }
        for (Eigen::Index i = 0; i < n_in; ++i) post(j, i) = prior.mass()[i] * law.rows()(i, j) / out[j];
        post.row(j) /= post.row(j).sum();
    }
    return Posterior{CondPmf(std::move(post)), std::move(reachable)};
}

/// Total variation distance between two pmfs on the same grid.
inline double total_variation(const Pmf& a, const Pmf& b) {
    if (a.size() != b.size()) throw DimensionMismatch("total_variation: length mismatch");
    return 0.5 * (a.mass() - b.mass()).cwiseAbs().sum();
}

}  // namespace casopt
