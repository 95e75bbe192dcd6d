// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"

#include "casopt/scalar_model.hpp"

using namespace casopt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ScalarScenario unit_scenario(GridSizes sizes = {}) { return make_scalar_scenario(1.0, 1.0, 1.0, 5.0, sizes); }

std::size_t index_of(const Grid& g, double v) {
    const std::size_t i = g.nearest(v);
    REQUIRE(std::abs(g[i] - v) < 1e-12);
    return i;
}

double normal_cdf(double x, double mean, double var) { return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var)); }

/// e(x) gap between the generic discrete path and the closed form, worst over the X grid.
double generic_gap(std::size_t s_points, std::size_t z_points) {
    GridSizes sz;
    sz.x = 13;
    sz.s = s_points;
    sz.z = z_points;
    const ScalarScenario sc = make_scalar_scenario(1.0, 1.0, 1.0, 1.0, sz);
    const ScalarModel g = build_scalar_model(sc, true);
    const SensingCostTable c = gaussian_sensing_cost(sc);
    return (g.costs.e - c.e).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("default grids") {
    const ScalarScenario sc = unit_scenario();
    CHECK(sc.grids.x.size() == 121);
    CHECK_THAT(sc.grids.x.max(), WithinAbs(3.0 * std::sqrt(5.0), 1e-12));
    CHECK_THAT(sc.grids.s.max(), WithinAbs(5.0, 1e-12));
    CHECK(sc.grids.s_tilde.size() == sc.grids.s.size());
    CHECK(sc.grids.s_hat.size() == sc.grids.s.size());
    // The two-point sensing-optimal atoms +-sqrt(B) are grid points.
    index_of(sc.grids.x, std::sqrt(5.0));
    index_of(sc.grids.x, -std::sqrt(5.0));
}

TEST_CASE("scenario validation") {
    CHECK_THROWS_AS(make_scalar_scenario(0.0, 1.0, 1.0, 5.0), InvalidArgument);
    CHECK_THROWS_AS(make_scalar_scenario(1.0, -1.0, 1.0, 5.0), InvalidArgument);
    CHECK_THROWS_AS(make_scalar_scenario(1.0, 1.0, 1.0, 0.0), InvalidArgument);
}

TEST_CASE("sensing channel") {
    GridSizes sz;
    sz.x = 13;
    sz.s = 41;
    const ScalarScenario sc = make_scalar_scenario(1.0, 1.0, 1.0, 1.0, sz);
    const CondPmf q = build_sensing_channel(sc);
    const std::size_t ns = sc.grids.s.size();
    const std::size_t x0 = index_of(sc.grids.x, 0.0);
    const std::size_t x1 = index_of(sc.grids.x, 1.0);
    const std::size_t s1 = index_of(sc.grids.s, 1.0);

    SECTION("zero input ignores the state") {
        for (std::size_t is = 1; is < ns; ++is)
            CHECK((q.rows().row(static_cast<Eigen::Index>(x0 * ns + is)) - q.rows().row(static_cast<Eigen::Index>(x0 * ns)))
                      .cwiseAbs()
                      .maxCoeff() < 1e-15);
    }
    SECTION("bins are Gaussian interval probabilities") {
        const auto edges = sc.grids.z.edges();
        const auto row = q.rows().row(static_cast<Eigen::Index>(x1 * ns + s1));
        double inside = normal_cdf(edges.back(), 1.0, 1.0) - normal_cdf(edges.front(), 1.0, 1.0);
        for (std::size_t iz = 0; iz < sc.grids.z.size(); ++iz) {
            const double p = (normal_cdf(edges[iz + 1], 1.0, 1.0) - normal_cdf(edges[iz], 1.0, 1.0)) / inside;
            CHECK_THAT(row[static_cast<Eigen::Index>(iz)], WithinAbs(p, 1e-12));
        }
    }
    SECTION("rows are stochastic") {
        for (Eigen::Index i = 0; i < q.rows().rows(); ++i) CHECK_THAT(q.rows().row(i).sum(), WithinAbs(1.0, 1e-10));
    }
}

TEST_CASE("noiseless sensing concentrates the observation") {
    GridSizes sz;
    sz.x = 13;
    sz.s = 41;
    sz.z = 301;
    const ScalarScenario sc = make_scalar_scenario(1.0, 1e-6, 1.0, 1.0, sz);
    const CondPmf q = build_sensing_channel(sc);
    const std::size_t ns = sc.grids.s.size();
    const std::size_t x1 = index_of(sc.grids.x, 1.0);
    const std::size_t s1 = index_of(sc.grids.s, 1.0);
    const auto row = q.rows().row(static_cast<Eigen::Index>(x1 * ns + s1));
    const std::size_t peak = sc.grids.z.nearest(1.0);
    CHECK(row[static_cast<Eigen::Index>(peak)] > 0.99);
}

TEST_CASE("truncated grids are rejected") {
    ScalarScenario sc = unit_scenario();
    sc.grids.y = Grid::symmetric(1.0, 31);
    CHECK_THROWS_AS(build_comm_channel(sc), TruncationError);
    sc = unit_scenario();
    sc.grids.z = Grid::symmetric(1.0, 31);
    CHECK_THROWS_AS(build_sensing_channel(sc), TruncationError);
}

TEST_CASE("optimal estimator") {
    GridSizes sz;
    sz.x = 13;
    sz.s = 201;
    sz.z = 201;
    const ScalarScenario sc = make_scalar_scenario(1.0, 1.0, 1.0, 1.0, sz);
    const CondPmf q = build_sensing_channel(sc);
    const EstimatorTable est = optimal_estimator(sc, q, state_prior(sc));
    const std::size_t x0 = index_of(sc.grids.x, 0.0);
    const std::size_t x2 = index_of(sc.grids.x, 2.0);
    for (std::size_t iz = 0; iz < sc.grids.z.size(); ++iz) CHECK_THAT(est(x0, iz), WithinAbs(0.0, 1e-12));
    // Linear-Gaussian MMSE x nu^2 / (sigma^2 + x^2 nu^2) z at x = 2, z = 1.
    const std::size_t z1 = sc.grids.z.nearest(1.0);
    const double z = sc.grids.z[z1];
    CHECK_THAT(est(x2, z1), WithinAbs(0.4 * z, 5e-3));
    CHECK_THAT(mmse_gain(sc, 2.0), WithinAbs(0.4, 1e-15));
    CHECK_THAT(mmse_gain(sc, 2.0) * z, WithinAbs(0.4 * z, 1e-15));
    for (std::size_t ix = 0; ix < sc.grids.x.size(); ++ix)
        for (std::size_t iz = 0; iz < sc.grids.z.size(); ++iz) {
            CHECK(est(ix, iz) >= sc.grids.s.min());
            CHECK(est(ix, iz) <= sc.grids.s.max());
        }
}

TEST_CASE("noiseless estimator follows the observation") {
    GridSizes sz;
    sz.x = 13;
    sz.s = 201;
    sz.z = 201;
    const ScalarScenario sc = make_scalar_scenario(1.0, 1e-6, 1.0, 1.0, sz);
    const CondPmf q = build_sensing_channel(sc);
    const EstimatorTable est = optimal_estimator(sc, q, state_prior(sc));
    const std::size_t x1 = index_of(sc.grids.x, 1.0);
    for (double z : {-2.0, -0.5, 0.7, 1.5}) {
        const std::size_t iz = sc.grids.z.nearest(z);
        CHECK_THAT(est(x1, iz), WithinAbs(sc.grids.z[iz], 0.05));
    }
}

TEST_CASE("closed-form sensing cost") {
    GridSizes sz;
    sz.x = 13;
    const ScalarScenario sc = make_scalar_scenario(1.0, 1.0, 1.0, 1.0, sz);
    const SensingCostTable c = gaussian_sensing_cost(sc);
    const Grid& gx = sc.grids.x;
    CHECK_THAT(c.e[static_cast<Eigen::Index>(index_of(gx, 0.0))], WithinAbs(1.0, 1e-15));
    CHECK_THAT(c.e[static_cast<Eigen::Index>(index_of(gx, 1.0))], WithinAbs(0.5, 1e-12));
    for (std::size_t i = 0; i < gx.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const auto mirror = static_cast<Eigen::Index>(gx.size() - 1 - i);
        CHECK(c.e[k] == c.e[mirror]);
        CHECK(c.e[k] <= sc.state_variance);
        CHECK(c.e[k] >= 0.0);
        CHECK(c.b[k] == gx[i] * gx[i]);
        if (gx[i] > 0.0) CHECK(c.e[k] <= c.e[k - 1]);
    }
    CHECK(c.e[static_cast<Eigen::Index>(gx.size() - 1)] < 0.11);
    const SensingCostTable wide = gaussian_sensing_cost(unit_scenario());
    CHECK(wide.e[static_cast<Eigen::Index>(unit_scenario().grids.x.size() - 1)] < 0.03);
}

TEST_CASE("generic sensing cost matches the closed form") {
    GridSizes sz;
    sz.x = 13;
    const ScalarScenario sc = make_scalar_scenario(1.0, 1.0, 1.0, 1.0, sz);
    const ScalarModel g = build_scalar_model(sc, true);
    const SensingCostTable c = gaussian_sensing_cost(sc);
    CHECK((g.costs.e - c.e).cwiseAbs().maxCoeff() < 2e-2);
    CHECK(g.costs.b.isApprox(c.b));
}

TEST_CASE("grid refinement shrinks the generic gap") {
    const double coarse = generic_gap(51, 76);
    const double fine = generic_gap(101, 151);
    const double finer = generic_gap(201, 301);
    CHECK(fine <= 0.5 * coarse);
    CHECK(finer <= 0.5 * fine);
}

TEST_CASE("estimate distribution") {
    const ScalarScenario sc = unit_scenario();
    const Grid& gx = sc.grids.x;
    const std::size_t n = gx.size();

    SECTION("zero input gives a point mass at zero") {
        const Pmf p = estimate_distribution(sc, Pmf::point_mass(n, index_of(gx, 0.0)));
        CHECK_THAT(p[index_of(sc.grids.s_tilde, 0.0)], WithinAbs(1.0, 1e-12));
    }
    SECTION("single atom variance") {
        const std::size_t i0 = gx.nearest(1.0);
        const double x0 = gx[i0];
        const Pmf p = estimate_distribution(sc, Pmf::point_mass(n, i0));
        double m2 = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) m2 += p[i] * sc.grids.s_tilde[i] * sc.grids.s_tilde[i];
        const double expected = x0 * x0 / (1.0 + x0 * x0);
        const double h = sc.grids.s_tilde[1] - sc.grids.s_tilde[0];
        CHECK_THAT(m2, WithinAbs(expected, h * h / 12.0 + 1e-3));
    }
    SECTION("symmetric input has zero mean") {
        const Pmf p = estimate_distribution(sc, Pmf::uniform(n));
        double m1 = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) m1 += p[i] * sc.grids.s_tilde[i];
        CHECK_THAT(m1, WithinAbs(0.0, 1e-6));
    }
    SECTION("expected sensing cost stays below the prior variance") {
        const SensingCostTable c = gaussian_sensing_cost(sc);
        CHECK(Pmf::uniform(n).expectation(c.e) <= sc.state_variance);
    }
}

TEST_CASE("generic and closed-form estimate laws agree") {
    GridSizes sz;
    sz.x = 13;
    sz.s = 201;
    sz.z = 301;
    const ScalarScenario sc = make_scalar_scenario(1.0, 1.0, 1.0, 1.0, sz);
    const ScalarModel g = build_scalar_model(sc, true);
    Vector w = Vector::Zero(13);
    w[index_of(sc.grids.x, 0.0)] = 0.2;
    w[index_of(sc.grids.x, 1.0)] = 0.5;
    w[index_of(sc.grids.x, -2.5)] = 0.3;
    const Pmf px = normalize(w);
    const Pmf generic = g.estimates(px);
    const Pmf closed = estimate_distribution(sc, px);
    // Cumulative distributions are compared: the generic law sits on posterior means, not bin centres.
    double cg = 0.0, cc = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < generic.size(); ++i) {
        cg += generic[i];
        cc += closed[i];
        worst = std::max(worst, std::abs(cg - cc));
    }
    CHECK(worst < 2e-2);
    CHECK(total_variation(generic, closed) < 0.1);
}

TEST_CASE("communication channel") {
    const ScalarScenario sc = unit_scenario();
    const CondPmf q = build_comm_channel(sc);
    for (std::size_t ix = 0; ix < sc.grids.x.size(); ix += 10) {
        double mean = 0.0;
        for (std::size_t iy = 0; iy < sc.grids.y.size(); ++iy) mean += q(ix, iy) * sc.grids.y[iy];
        CHECK_THAT(mean, WithinAbs(sc.grids.x[ix], sc.grids.y[1] - sc.grids.y[0]));
    }
    // Gaussian-shaped input of power 5 stays below the real AWGN capacity 0.5 log2(1 + 5).
    Vector w(static_cast<Eigen::Index>(sc.grids.x.size()));
    for (std::size_t i = 0; i < sc.grids.x.size(); ++i) w[static_cast<Eigen::Index>(i)] = std::exp(-sc.grids.x[i] * sc.grids.x[i] / 10.0);
    const double mi = mutual_information(normalize(w), q);
    CHECK(mi <= 0.5 * std::log2(6.0) + 1e-9);
    CHECK(mi <= std::log2(6.0));

    const ScalarScenario noisy = make_scalar_scenario(1.0, 1.0, 1e4, 5.0);
    const CondPmf qn = build_comm_channel(noisy);
    double m2 = 0.0;
    for (std::size_t i = 0; i < noisy.grids.x.size(); ++i) m2 += noisy.grids.x[i] * noisy.grids.x[i];
    m2 /= static_cast<double>(noisy.grids.x.size());
    const double mi_noisy = mutual_information(Pmf::uniform(noisy.grids.x.size()), qn);
    CHECK(mi_noisy <= 0.5 * std::log2(1.0 + m2 / 1e4) + 1e-9);
    CHECK(mi_noisy < 2e-3);
}
