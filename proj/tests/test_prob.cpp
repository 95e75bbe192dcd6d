// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "catch_amalgamated.hpp"

#include "casopt/prob.hpp"
#include "casopt/rng.hpp"

using namespace casopt;
using Catch::Matchers::WithinAbs;

namespace {

double binary_entropy(double p) { return -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

CondPmf bsc(double p) {
    RowMatrix m(2, 2);
    m << 1 - p, p, p, 1 - p;
    return CondPmf(m);
}

Pmf random_pmf(CounterRng& rng, std::size_t n) {
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = rng.uniform();
    return normalize(v);
}

CondPmf random_law(CounterRng& rng, std::size_t in, std::size_t out) {
    RowMatrix w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform();
    return CondPmf::from_weights(w);
}

}  // namespace

TEST_CASE("grid construction") {
    const Grid g = Grid::symmetric(2.0, 5);
    CHECK(g.size() == 5);
    CHECK(g[0] == -2.0);
    CHECK(g[2] == 0.0);
    CHECK(g[4] == 2.0);
    const auto e = g.edges();
    REQUIRE(e.size() == 6);
    CHECK_THAT(e[0], WithinAbs(-2.5, 1e-15));
    CHECK_THAT(e[3], WithinAbs(0.5, 1e-15));
    CHECK(g.nearest(0.74) == 3);
    CHECK(g.nearest(-9.0) == 0);
    CHECK(g.nearest(9.0) == 4);
    CHECK_THROWS_AS(Grid({1.0}), InvalidArgument);
    CHECK_THROWS_AS(Grid({0.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(Grid::uniform(1.0, 0.0, 3), InvalidArgument);
}

TEST_CASE("pmf validation") {
    CHECK_THROWS_AS(Pmf(Vector::Constant(2, 0.6)), DegeneratePmf);
    Vector neg(2);
    neg << -0.1, 1.1;
    CHECK_THROWS_AS(Pmf(neg), DegeneratePmf);
    CHECK_THROWS_AS(normalize(Vector::Zero(3)), DegeneratePmf);
    const Pmf p = normalize(Vector::Constant(3, 2.0));
    CHECK_THAT(p[1], WithinAbs(1.0 / 3.0, 1e-16));
}

TEST_CASE("entropy") {
    CHECK_THAT(entropy(Pmf::uniform(4)), WithinAbs(2.0, 1e-14));
    CHECK(entropy(Pmf::point_mass(5, 2)) == 0.0);
    Vector v(2);
    v << 0.11, 0.89;
    CHECK_THAT(entropy(Pmf(v)), WithinAbs(0.49999, 1e-4));
    for (std::size_t n : {1u, 2u, 3u, 7u, 64u, 1000u}) CHECK_THAT(entropy(Pmf::uniform(n)), WithinAbs(std::log2(n), 1e-12));

    CounterRng rng(1, 0);
    for (int k = 0; k < 50; ++k) {
        const Pmf p = random_pmf(rng, 9);
        const double h = entropy(p);
        CHECK(h >= 0.0);
        CHECK(h <= std::log2(9.0) + 1e-12);
    }
}

TEST_CASE("mutual information closed forms") {
    CHECK_THAT(mutual_information(Pmf::uniform(4), CondPmf::identity(4)), WithinAbs(2.0, 1e-14));

    RowMatrix flat = RowMatrix::Constant(3, 5, 0.2);
    Vector px(3);
    px << 0.2, 0.5, 0.3;
    CHECK_THAT(mutual_information(Pmf(px), CondPmf(flat)), WithinAbs(0.0, 1e-15));

    const double c = 1.0 - binary_entropy(0.11);
    CHECK_THAT(mutual_information(Pmf::uniform(2), bsc(0.11)), WithinAbs(c, 1e-12));
    CHECK_THAT(mutual_information(Pmf::uniform(2), bsc(0.11)), WithinAbs(0.5, 1e-3));

    CHECK_THROWS_AS(mutual_information(Pmf::uniform(3), bsc(0.1)), DimensionMismatch);
}

TEST_CASE("mutual information properties") {
    CounterRng rng(2, 0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t nin = 2 + trial % 5, nout = 3 + trial % 4;
        const Pmf p = random_pmf(rng, nin);
        const CondPmf law = random_law(rng, nin, nout);
        const double mi = mutual_information(p, law);
        CHECK(mi >= 0.0);
        CHECK(mi <= entropy(p) + 1e-12);
        CHECK(mi <= entropy(normalize(law.marginal(p))) + 1e-12);

        // Relabel inputs and outputs with matched permutations.
        std::vector<Eigen::Index> pi(nin), po(nout);
        std::iota(pi.begin(), pi.end(), 0);
        std::iota(po.begin(), po.end(), 0);
        std::reverse(pi.begin(), pi.end());
        std::rotate(po.begin(), po.begin() + 1, po.end());
        Vector pp(static_cast<Eigen::Index>(nin));
        RowMatrix lp(static_cast<Eigen::Index>(nin), static_cast<Eigen::Index>(nout));
        for (std::size_t i = 0; i < nin; ++i) {
            pp[pi[i]] = p[i];
            for (std::size_t j = 0; j < nout; ++j) lp(pi[i], po[j]) = law(i, j);
        }
        CHECK_THAT(mutual_information(Pmf(pp), CondPmf(lp)), WithinAbs(mi, 1e-12));
    }
}

TEST_CASE("channel law rows are stochastic") {
    CounterRng rng(3, 0);
    const CondPmf law = random_law(rng, 6, 11);
    for (Eigen::Index i = 0; i < law.rows().rows(); ++i) CHECK_THAT(law.rows().row(i).sum(), WithinAbs(1.0, 1e-10));
    RowMatrix bad = RowMatrix::Constant(2, 2, 0.6);
    CHECK_THROWS_AS(CondPmf(bad), DegeneratePmf);
}

TEST_CASE("bayes posterior") {
    SECTION("identity channel") {
        const Posterior post = bayes_posterior(Pmf::uniform(3), CondPmf::identity(3));
        CHECK(post.law.rows().isApprox(RowMatrix::Identity(3, 3)));
    }
    SECTION("constant channel returns the prior") {
        Vector prior(2);
        prior << 0.3, 0.7;
        const Posterior post = bayes_posterior(Pmf(prior), CondPmf(RowMatrix::Constant(2, 4, 0.25)));
        for (Eigen::Index j = 0; j < 4; ++j) {
            CHECK_THAT(post.law.rows()(j, 0), WithinAbs(0.3, 1e-15));
            CHECK_THAT(post.law.rows()(j, 1), WithinAbs(0.7, 1e-15));
        }
    }
    SECTION("binary symmetric channel by hand") {
        const Posterior post = bayes_posterior(Pmf::uniform(2), bsc(0.1));
        CHECK_THAT(post.law(0, 0), WithinAbs(0.9, 1e-15));
        CHECK_THAT(post.law(0, 1), WithinAbs(0.1, 1e-15));
    }
    SECTION("unreachable outputs are flagged") {
        RowMatrix m(2, 3);
        m << 0.5, 0.5, 0.0, 0.0, 1.0, 0.0;
        const Posterior post = bayes_posterior(Pmf::uniform(2), CondPmf(m));
        CHECK(post.is_reachable(0));
        CHECK(post.is_reachable(1));
        CHECK_FALSE(post.is_reachable(2));
        CHECK(std::isfinite(post.law(2, 0)));
    }
    SECTION("remarginalization recovers the output marginal") {
        CounterRng rng(4, 0);
        for (int t = 0; t < 20; ++t) {
            const Pmf prior = random_pmf(rng, 5);
            const CondPmf law = random_law(rng, 5, 7);
            const Posterior post = bayes_posterior(prior, law);
            const Vector out = law.marginal(prior);
            // sum_j P(out=j) P(in | j) recovers the prior, and the joint factorizes both ways.
            const Vector back = post.law.rows().transpose() * out;
            CHECK((back - prior.mass()).cwiseAbs().maxCoeff() < 1e-12);
            for (Eigen::Index i = 0; i < 5; ++i)
                for (Eigen::Index j = 0; j < 7; ++j)
                    CHECK_THAT(post.law.rows()(j, i) * out[j], WithinAbs(prior.mass()[i] * law.rows()(i, j), 1e-12));
        }
    }
}

TEST_CASE("total variation") {
    Vector a(2), b(2);
    a << 1.0, 0.0;
    b << 0.25, 0.75;
    CHECK_THAT(total_variation(Pmf(a), Pmf(b)), WithinAbs(0.75, 1e-15));
}
