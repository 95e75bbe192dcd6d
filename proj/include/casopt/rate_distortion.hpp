// SPDX-License-Identifier: Apache-2.0
#pragma once

// Blahut-Arimoto computation of the rate-distortion function of a discrete
// source under quadratic distortion, parameterized by the slope lambda_s < 0:
//
//     Q(s_hat | s)  ∝  P(s_hat) exp(lambda_s d(s, s_hat)),
//     P(s_hat)      =  sum_s P(s) Q(s_hat | s).
//
// A sweep over slopes yields tangent points of R(D); their lower convex
// envelope, linearly interpolated, is the distortion-rate curve.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "casopt/errors.hpp"
#include "casopt/prob.hpp"

namespace casopt {

struct RdConfig {
    std::size_t max_iters = 200000;
    double rel_tol = 1e-15;  // relative change of the Lagrangian I - lambda_s D
    double gap_tol = 1e-9;   // Blahut duality gap on the Lagrangian, nats
    double accept_gap = 1e-4; // gap still counted as converged when max_iters runs out
    double relaxation = 32.0; // cap on the adaptive over-relaxation exponent; 1 gives the plain iteration
    double monotone_slack = 1e-12;
};

struct RdPoint {
    double distortion = 0.0;
    double rate_bits = 0.0;
    double slope = 0.0;  // lambda_s, natural-log units
};

struct RdSolution {
    RdPoint point;
    CondPmf test_channel;  // Q(s_hat | s_tilde), rows over the source grid
    Vector output;         // P(s_hat)
    std::size_t iterations = 0;
    bool converged = false;
    double gap = 0.0;  // last certified Lagrangian gap, nats
    std::size_t monotone_violations = 0;
};

namespace detail {

inline RowMatrix squared_distance(const Grid& src, const Grid& rec) {
    RowMatrix d(static_cast<Eigen::Index>(src.size()), static_cast<Eigen::Index>(rec.size()));
    for (std::size_t i = 0; i < src.size(); ++i)
        for (std::size_t j = 0; j < rec.size(); ++j) {
            const double t = src[i] - rec[j];
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t * t;
        }
    return d;
}

}  // namespace detail

/// min over reconstruction points of E d(S, s_hat): the distortion reachable at zero rate.
inline double zero_rate_distortion(const Pmf& source, const Grid& src, const Grid& rec) {
    if (source.size() != src.size()) throw DimensionMismatch("source pmf does not match its grid");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rec.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < src.size(); ++i) {
            const double t = src[i] - rec[j];
            acc += source[i] * t * t;
        }
        best = std::min(best, acc);
    }
    return best;
}

/// Tangent point of the rate-distortion curve at slope `slope` (< 0).
inline RdSolution rd_solve(const Pmf& source, double slope, const Grid& src, const Grid& rec,
                           const RdConfig& cfg = {}) {
    if (!(slope < 0.0)) throw InvalidArgument("rate-distortion slope must be negative");
    if (source.size() != src.size()) throw DimensionMismatch("source pmf does not match its grid");
    const RowMatrix d = detail::squared_distance(src, rec);
    // Kernel entries below 1e-150 are dropped so the iteration never touches subnormals.
    const RowMatrix a = (slope * d.array()).exp().unaryExpr([](double v) { return v < 1e-150 ? 0.0 : v; }).matrix();
    const RowMatrix ad = a.cwiseProduct(d);
    const Vector& p = source.mass();
    const auto ns = p.size();
    const auto nr = static_cast<Eigen::Index>(rec.size());

    Vector q = Vector::Constant(nr, 1.0 / static_cast<double>(nr));
    Vector den(ns);
    Vector ratio(ns);
    RdSolution sol;
    double prev = std::numeric_limits<double>::infinity();
    constexpr double tiny = 1e-150;

    // Lagrangian I - lambda_s D at the current q equals -sum_s P(s) ln den(s).
    auto lagrangian = [&](const Vector& qq) {
        den = a * qq;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < ns; ++i)
            if (p[i] > 0.0) acc -= p[i] * std::log(std::max(den[i], tiny));
        return acc;
    };

    Vector c(nr);
    // Flatter than the critical slope the optimum is the zero-rate point mass; test it directly.
    {
        Eigen::Index best = 0;
        (d.transpose() * p).minCoeff(&best);
        Vector delta = Vector::Zero(nr);
        delta[best] = 1.0;
        lagrangian(delta);
        bool usable = true;
        for (Eigen::Index i = 0; i < ns; ++i) {
            if (p[i] > 0.0 && !(den[i] > tiny)) usable = false;
            ratio[i] = p[i] > 0.0 ? p[i] / std::max(den[i], tiny) : 0.0;
        }
        c = a.transpose() * ratio;
        sol.gap = std::log(c.maxCoeff());
        if (usable && sol.gap <= cfg.gap_tol) {
            q = delta;
            sol.converged = true;
        }
    }
    Vector plain(nr);
    Vector cand(nr);
    double f = lagrangian(q);
    double omega = std::min(cfg.relaxation, 2.0);
    for (std::size_t k = 1; !sol.converged && k <= cfg.max_iters; ++k) {
        if (k > 1 && f > prev + cfg.monotone_slack * std::max(1.0, std::abs(prev))) ++sol.monotone_violations;
        sol.iterations = k;
        for (Eigen::Index i = 0; i < ns; ++i) ratio[i] = p[i] > 0.0 ? p[i] / std::max(den[i], tiny) : 0.0;
        c = a.transpose() * ratio;
        // f - ln max_j c_j lower-bounds the optimal Lagrangian, so ln max_j c_j is the remaining gap.
        const double gap = std::log(c.maxCoeff());
        sol.gap = gap;
        const bool stalled = k > 1 && std::abs(prev - f) <= cfg.rel_tol * std::max(std::abs(f), 1e-300);
        if (gap <= cfg.gap_tol || stalled) {
            sol.converged = true;
            break;
        }
        if (k == cfg.max_iters) {
            sol.converged = gap <= cfg.accept_gap;
            break;
        }
        prev = f;
        plain = q.cwiseProduct(c).cwiseMax(tiny);
        plain /= plain.sum();
        if (omega > 1.0) {
            // Over-relaxed step q c^omega, kept only when it does not raise the Lagrangian.
            cand = (q.array() * c.array().max(tiny).pow(omega)).matrix().cwiseMax(tiny);
            cand /= cand.sum();
            const double fc = lagrangian(cand);
            if (fc <= f) {
                q.swap(cand);
                f = fc;
                omega = std::min(2.0 * omega, cfg.relaxation);
                continue;
            }
            omega = std::max(0.5 * omega, 2.0);
        }
        q.swap(plain);
        f = lagrangian(q);
    }

    // Materialize the test channel from the final output law.
    den = a * q;
    RowMatrix w(ns, nr);
    for (Eigen::Index i = 0; i < ns; ++i) {
        if (den[i] > 0.0) {
            w.row(i) = (a.row(i).array() * q.transpose().array()) / den[i];
        } else {
            // Only reachable for zero-probability source points; map them to their nearest reconstruction.
            w.row(i).setZero();
            w(i, static_cast<Eigen::Index>(rec.nearest(src[static_cast<std::size_t>(i)]))) = 1.0;
        }
        w.row(i) /= w.row(i).sum();
    }
    const Vector out = w.transpose() * p;
    double dist = 0.0;
    double rate = 0.0;
    for (Eigen::Index i = 0; i < ns; ++i) {
        if (p[i] <= 0.0) continue;
        for (Eigen::Index j = 0; j < nr; ++j) {
            const double wij = w(i, j);
            if (wij <= 0.0) continue;
            dist += p[i] * wij * d(i, j);
            rate += p[i] * wij * std::log(wij / out[j]);
        }
    }
    sol.point = RdPoint{dist, std::max(0.0, nats_to_bits(rate)), slope};
    sol.test_channel = CondPmf(std::move(w), 1e-9);
    sol.output = out;
    return sol;
}

inline RdPoint rd_point(const Pmf& source, double slope, const Grid& src, const Grid& rec, const RdConfig& cfg = {}) {
    return rd_solve(source, slope, src, rec, cfg).point;
}

/// `count` slopes with magnitudes log-spaced over [lo, hi], ordered from steep to flat.
inline std::vector<double> log_spaced_slopes(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) throw InvalidArgument("invalid slope range");
    std::vector<double> out(count);
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = -hi * std::exp(-step * static_cast<double>(i));
    out.back() = -lo;
    return out;
}

/// Default slope set: 48 magnitudes over [0.05, 50].
inline std::vector<double> default_slopes() { return log_spaced_slopes(0.05, 50.0, 48); }

/// Distortion-rate curve: lower convex envelope of tangent points, ordered by increasing distortion.
class RdCurve {
public:
    RdCurve() = default;

    /// Builds the envelope from raw tangent points and the zero-rate endpoint.
    RdCurve(std::vector<RdPoint> raw, double zero_rate_dist, double source_entropy_bits)
        : zero_rate_(zero_rate_dist), entropy_(source_entropy_bits) {
        raw.push_back(RdPoint{zero_rate_dist, 0.0, 0.0});
        for (auto& p : raw) {
            p.distortion = std::clamp(p.distortion, 0.0, zero_rate_dist);
            p.rate_bits = std::clamp(p.rate_bits, 0.0, source_entropy_bits);
        }
        std::sort(raw.begin(), raw.end(), [](const RdPoint& l, const RdPoint& r) {
            return l.distortion < r.distortion || (l.distortion == r.distortion && l.rate_bits < r.rate_bits);
        });
        // Monotone-chain lower hull.
        std::vector<RdPoint> hull;
        for (const auto& p : raw) {
            if (!hull.empty() && hull.back().distortion == p.distortion) continue;  // keep the lowest rate
            while (hull.size() >= 2) {
                const auto& o = hull[hull.size() - 2];
                const auto& m = hull.back();
                const double cross = (m.distortion - o.distortion) * (p.rate_bits - o.rate_bits) -
                                     (m.rate_bits - o.rate_bits) * (p.distortion - o.distortion);
                if (cross <= 0.0) hull.pop_back();
                else break;
            }
            hull.push_back(p);
        }
        // Past its minimum the envelope would rise again; cut it there.
        std::size_t cut = 0;
        for (std::size_t i = 1; i < hull.size(); ++i)
            if (hull[i].rate_bits < hull[cut].rate_bits) cut = i;
        hull.resize(cut + 1);
        if (hull.size() < 2) throw InvalidArgument("degenerate rate-distortion curve: all points coincide");
        points_ = std::move(hull);
    }

    const std::vector<RdPoint>& points() const noexcept { return points_; }
    double zero_rate_distortion() const noexcept { return zero_rate_; }
    double min_distortion() const noexcept { return points_.front().distortion; }
    double max_rate() const noexcept { return points_.front().rate_bits; }
    double source_entropy() const noexcept { return entropy_; }

    /// R(D) on the envelope; distortions below the tabulated range clamp to the largest rate.
    double rate_at(double distortion) const {
        if (distortion <= points_.front().distortion) return points_.front().rate_bits;
        if (distortion >= points_.back().distortion) return points_.back().rate_bits;
        for (std::size_t i = 1; i < points_.size(); ++i) {
            if (distortion <= points_[i].distortion) {
                const auto& l = points_[i - 1];
                const auto& r = points_[i];
                const double t = (distortion - l.distortion) / (r.distortion - l.distortion);
                return l.rate_bits + t * (r.rate_bits - l.rate_bits);
            }
        }
        return points_.back().rate_bits;
    }

    struct Lookup {
        double distortion;
        bool extrapolated;  // rate exceeded the tabulated range and was clamped
    };

    /// D(R) on the envelope.
    Lookup distortion_at(double rate_bits) const {
        if (!(rate_bits >= 0.0)) throw InvalidArgument("rate must be non-negative");
        if (rate_bits >= points_.front().rate_bits)
            return {points_.front().distortion, rate_bits > points_.front().rate_bits};
        for (std::size_t i = 1; i < points_.size(); ++i) {
            if (rate_bits >= points_[i].rate_bits) {
                const auto& l = points_[i - 1];
                const auto& r = points_[i];
                const double t = (l.rate_bits - rate_bits) / (l.rate_bits - r.rate_bits);
                return {l.distortion + t * (r.distortion - l.distortion), false};
            }
        }
        return {points_.back().distortion, false};
    }

private:
    std::vector<RdPoint> points_;
    double zero_rate_ = 0.0;
    double entropy_ = 0.0;
};

struct RdCurveBuild {
    RdCurve curve;
    std::vector<RdSolution> solutions;  // one per slope, in input order
    bool all_converged = true;
};

inline RdCurveBuild build_curve_detailed(const Pmf& source, const std::vector<double>& slopes, const Grid& src,
                                         const Grid& rec, const RdConfig& cfg = {}) {
    std::vector<double> distinct = slopes;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw InvalidArgument("rate-distortion curve needs at least 2 distinct slopes");
    RdCurveBuild out;
    std::vector<RdPoint> raw;
    raw.reserve(slopes.size());
    for (double s : slopes) {
        out.solutions.push_back(rd_solve(source, s, src, rec, cfg));
        out.all_converged = out.all_converged && out.solutions.back().converged;
        raw.push_back(out.solutions.back().point);
    }
    out.curve = RdCurve(std::move(raw), zero_rate_distortion(source, src, rec), entropy(source));
    return out;
}

inline RdCurve build_curve(const Pmf& source, const std::vector<double>& slopes, const Grid& src, const Grid& rec,
                           const RdConfig& cfg = {}) {
    return build_curve_detailed(source, slopes, src, rec, cfg).curve;
}

/// D_IT(rate) read off the envelope.
inline double distortion_at_rate(const RdCurve& curve, double rate_bits) {
    if (curve.points().empty()) throw InvalidArgument("empty rate-distortion curve");
    return curve.distortion_at(rate_bits).distortion;
}

}  // namespace casopt
