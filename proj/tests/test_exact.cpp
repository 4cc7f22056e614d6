#include <doctest.h>

#include <cmath>
#include <vector>

#include "mkest/exact.hpp"
#include "mkest/errors.hpp"
#include "mkest/simulate.hpp"
#include "oracles.hpp"

using namespace mkest;

TEST_SUITE("exact") {
    TEST_CASE("conjugate posterior parameters") {
        CountMatrix w(2, 2);
        w << 3, 1, 0, 4;
        const auto post = conjugate_posterior(PriorSpec::uniform(2), {w}, SupportMask::Constant(2, 2, true));
        REQUIRE(post.rows[0]);
        CHECK(post.rows[0]->alpha()[0] == 4.0);
        CHECK(post.rows[0]->alpha()[1] == 2.0);
        CHECK(post.rows[1]->alpha()[0] == 1.0);
        CHECK(post.rows[1]->alpha()[1] == 5.0);
        CHECK(post.mean()(0, 0) == doctest::Approx(4.0 / 6.0));
        CHECK(post.mean()(1, 1) == doctest::Approx(5.0 / 6.0));
        const auto prior = post.as_prior();
        CHECK(prior.gamma(0, 0) == 4.0);
    }

    TEST_CASE("fixed rows and unsupported entries") {
        const auto support = presets::turbine_matrix().support();
        CountMatrix w = CountMatrix::Zero(4, 4);
        w(0, 0) = 5;
        w(0, 1) = 2;
        w(3, 3) = 9;
        const auto post = conjugate_posterior(PriorSpec::uniform(4), {w}, support);
        CHECK_FALSE(post.rows[3]);
        REQUIRE(post.rows[2]);
        CHECK(post.rows[2]->size() == 2);
        RandomStream rng(1);
        const auto m = draw_matrix(post, rng);
        CHECK(m(3, 3) == 1.0);
        CHECK(m(1, 0) == 0.0);
        CHECK_FALSE(validate(TransitionMatrix(m, support)));
    }

    TEST_CASE("rejects counts outside the support") {
        CountMatrix w = CountMatrix::Zero(4, 4);
        w(1, 0) = 1;
        CHECK_THROWS_AS(conjugate_posterior(PriorSpec::uniform(4), {w}, presets::turbine_matrix().support()),
                        InconsistentDataError);
    }

    TEST_CASE("prior validation") {
        PriorSpec p = PriorSpec::uniform(2);
        p.gamma(0, 1) = 0.0;
        CHECK_THROWS_AS(p.check(SupportMask::Constant(2, 2, true)), ParameterError);
        SupportMask s = SupportMask::Constant(2, 2, true);
        s(0, 1) = false;
        CHECK_NOTHROW(p.check(s));
    }

    TEST_CASE("sampled rows match their Beta marginals") {
        CountMatrix w(3, 3);
        w << 12, 5, 3, 2, 20, 8, 1, 1, 30;
        const auto post = conjugate_posterior(PriorSpec::uniform(3), {w}, SupportMask::Constant(3, 3, true));
        RandomStream rng(2);
        const auto sample = sample_posterior(post, 20000, rng);
        REQUIRE(sample.size() == 20000);
        std::vector<double> x;
        for (const auto& d : sample.draws) x.push_back(d.psi(0, 1));
        // row 1 entry 2 ~ Beta(6, 13 + 4)
        const oracle::GridPosterior beta(
            [](double v) { return 5.0 * std::log(v) + 16.0 * std::log1p(-v); }, 1e-9, 1 - 1e-9, 20001);
        CHECK(oracle::ks_one_sample(x, [&](double v) { return beta.cdf(v); }) < 0.015);
        CHECK(oracle::mean(x) == doctest::Approx(6.0 / 23.0).epsilon(0.01));
    }

    TEST_CASE("posterior mean approaches the truth") {
        RandomStream rng(3);
        const auto panel = simulate_panel(presets::lee_matrix(), presets::lee_initial(), 5000, 20, rng);
        const auto support = presets::lee_matrix().support();
        const auto post = conjugate_posterior(PriorSpec::uniform(4), count_transitions(panel), support);
        CHECK((post.mean() - oracle::lee()).cwiseAbs().maxCoeff() < 0.01);
    }
}
