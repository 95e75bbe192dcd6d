// SPDX-License-Identifier: Apache-2.0
#pragma once

// Monte Carlo check of the quadratic separability identity
//
//     E(S - S_hat)^2 = E(S - S_tilde)^2 + E(S_tilde - S_hat)^2
//
// along the chain X ~ P_X, S ~ N(0, nu^2), Z = X S + N_s, S_tilde = k g(X) Z,
// S_hat ~ Q(. | S_tilde) from a rate-distortion test channel. With k = 1 the
// estimate is the conditional mean and the cross term vanishes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "casopt/errors.hpp"
#include "casopt/prob.hpp"
#include "casopt/rate_distortion.hpp"
#include "casopt/rng.hpp"
#include "casopt/scalar_model.hpp"

namespace casopt {

struct SeparabilityConfig {
    std::size_t samples = 100000;
    double gain_scale = 1.0;  // 1: MMSE estimator; anything else is a biased linear estimator
    std::uint64_t seed = 1;
    RdConfig rd;
    std::vector<double> slopes = default_slopes();
};

struct SeparabilityReport {
    double total = 0.0;          // E(S - S_hat)^2
    double sensing = 0.0;        // E(S - S_tilde)^2
    double communication = 0.0;  // E(S_tilde - S_hat)^2
    double violation = 0.0;      // |total - sensing - communication| / total
    double slope = 0.0;          // test channel used
    double rate_bits = 0.0;
    std::size_t samples = 0;
};

/// Law of k g(X) Z on the estimate grid: a mixture over x of N(0, k^2 Var(S_tilde | X = x)).
inline Pmf scaled_estimate_distribution(const ScalarScenario& sc, const Pmf& p_x, double gain_scale,
                                        double truncation_tol = 1e-6) {
    const auto& gx = sc.grids.x;
    if (p_x.size() != gx.size()) throw DimensionMismatch("P_X length differs from the X grid");
    const auto edges = sc.grids.s_tilde.edges();
    const auto n = static_cast<Eigen::Index>(sc.grids.s_tilde.size());
    Vector acc = Vector::Zero(n);
    Vector row(n);
    double lost = 0.0;
    for (std::size_t ix = 0; ix < gx.size(); ++ix) {
        if (p_x[ix] <= 0.0) continue;
        const double var = gain_scale * gain_scale * estimate_variance(sc, gx[ix]);
        lost += p_x[ix] * detail::discretize_gaussian(edges, 0.0, var, row.data());
        acc += p_x[ix] * row;
    }
    if (lost > truncation_tol) throw TruncationError("estimate grid does not span the scaled estimates", lost);
    return normalize(acc);
}

/// Runs the chain with the test channel whose rate is the largest tabulated one not above `rate_bits`.
inline SeparabilityReport separability_check(const ScalarScenario& sc, const Pmf& p_x, double rate_bits,
                                             const SeparabilityConfig& cfg = {}) {
    if (cfg.samples == 0) throw InvalidArgument("separability check needs at least one sample");
    if (!(rate_bits >= 0.0)) throw InvalidArgument("rate must be non-negative");
    const auto& g = sc.grids;
    const Pmf source = scaled_estimate_distribution(sc, p_x, cfg.gain_scale);

    std::vector<RdSolution> candidates;
    for (double s : cfg.slopes) candidates.push_back(rd_solve(source, s, g.s_tilde, g.s_hat, cfg.rd));
    const RdSolution* chosen = nullptr;
    for (const auto& c : candidates)
        if (c.point.rate_bits <= rate_bits && (!chosen || c.point.rate_bits > chosen->point.rate_bits)) chosen = &c;
    if (!chosen) throw Error("no rate-distortion test channel below the requested rate");

    // Cumulative tables for inverse-CDF sampling.
    std::vector<double> cdf_x(p_x.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p_x.size(); ++i) cdf_x[i] = (acc += p_x[i]);
    const RowMatrix& q = chosen->test_channel.rows();
    RowMatrix cdf_q(q.rows(), q.cols());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        double c = 0.0;
        for (Eigen::Index j = 0; j < q.cols(); ++j) cdf_q(i, j) = (c += q(i, j));
    }
    auto draw = [](const double* cdf, std::size_t n, double u) {
        const double* it = std::lower_bound(cdf, cdf + n, u * cdf[n - 1]);
        return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf, static_cast<std::ptrdiff_t>(n) - 1));
    };

    CounterRng rng(cfg.seed, 0);
    const double nu = std::sqrt(sc.state_variance);
    const double sigma = std::sqrt(sc.sensing_noise_variance);
    const auto nh = static_cast<std::size_t>(q.cols());
    double tot = 0.0, sen = 0.0, com = 0.0;
    for (std::size_t k = 0; k < cfg.samples; ++k) {
        const double x = g.x[draw(cdf_x.data(), cdf_x.size(), rng.uniform())];
        const double s = nu * rng.normal();
        const double z = x * s + sigma * rng.normal();
        const double st = cfg.gain_scale * mmse_gain(sc, x) * z;
        const std::size_t row = g.s_tilde.nearest(st);
        const double sh = g.s_hat[draw(&cdf_q(static_cast<Eigen::Index>(row), 0), nh, rng.uniform())];
        tot += (s - sh) * (s - sh);
        sen += (s - st) * (s - st);
        com += (st - sh) * (st - sh);
    }
    const double n = static_cast<double>(cfg.samples);
    SeparabilityReport rep;
    rep.total = tot / n;
    rep.sensing = sen / n;
    rep.communication = com / n;
    rep.violation = std::abs(rep.total - rep.sensing - rep.communication) / rep.total;
    rep.slope = chosen->point.slope;
    rep.rate_bits = chosen->point.rate_bits;
    rep.samples = cfg.samples;
    return rep;
}

}  // namespace casopt
