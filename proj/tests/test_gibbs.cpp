#include <doctest.h>

#include <array>
#include <cmath>

#include "mkest/errors.hpp"
#include "mkest/gibbs.hpp"
#include "mkest/simulate.hpp"
#include "oracles.hpp"

using namespace mkest;

namespace {

SequencePanel one_row(int states, std::initializer_list<int> cells) {
    Eigen::MatrixXi t(1, static_cast<Eigen::Index>(cells.size()));
    Eigen::Index j = 0;
    for (int c : cells) t(0, j++) = c;
    return SequencePanel(states, t);
}

}  // namespace

TEST_SUITE("gibbs") {
    TEST_CASE("config validation") {
        GibbsConfig c;
        CHECK_NOTHROW(c.check());
        c.monitor.check_interval = 4;
        CHECK_THROWS_AS(c.check(), ConfigError);
        c = {};
        c.n_iter = 0;
        CHECK_THROWS_AS(c.check(), ConfigError);
        c = {};
        c.monitor.threshold = 1.0;
        CHECK_THROWS_AS(c.check(), ConfigError);
    }

    TEST_CASE("a hidden cell between forced neighbours has one value") {
        Eigen::MatrixXd q(3, 3);
        q << 0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 1.0;
        const auto panel = one_row(3, {0, kMissing, 2});
        RandomStream rng(1);
        GibbsState s{TransitionMatrix(q), {}, initial_imputation(panel, TransitionMatrix(q), {}, rng), 0};
        CHECK(s.imputed.at(0, 1) == 1);
        for (int k = 0; k < 50; ++k) {
            impute_step(s, panel, {}, rng, false);
            CHECK(s.imputed.at(0, 1) == 1);
        }
    }

    TEST_CASE("single-cell conditional matches its closed form") {
        const TransitionMatrix lee(oracle::lee());
        const auto panel = one_row(4, {1, kMissing, 1});
        RandomStream rng(2);
        GibbsState s{lee, {}, initial_imputation(panel, lee, {}, rng), 0};
        std::array<double, 4> freq{};
        const int n = 60000;
        for (int k = 0; k < n; ++k) {
            impute_step(s, panel, {}, rng, false);
            freq[static_cast<std::size_t>(s.imputed.at(0, 1))] += 1.0 / n;
        }
        // psi(1, j) psi(j, 1) for j = 0, 1, 2
        const double w0 = 0.1 * 0.4, w1 = 0.5 * 0.5, w2 = 0.4 * 0.1, z = w0 + w1 + w2;
        CHECK(freq[0] == doctest::Approx(w0 / z).epsilon(0.05));
        CHECK(freq[1] == doctest::Approx(w1 / z).epsilon(0.02));
        CHECK(freq[2] == doctest::Approx(w2 / z).epsilon(0.05));
        CHECK(freq[3] == 0.0);
    }

    TEST_CASE("initial state weighting") {
        const TransitionMatrix lee(oracle::lee());
        const auto panel = one_row(4, {kMissing, 1});
        RandomStream rng(3);
        GibbsState s{lee, {}, initial_imputation(panel, lee, oracle::lee_p0(), rng), 0};
        double zero = 0.0;
        const int n = 40000;
        for (int k = 0; k < n; ++k) {
            impute_step(s, panel, oracle::lee_p0(), rng, false);
            zero += s.imputed.at(0, 0) == 0 ? 1.0 : 0.0;
        }
        // p0(j) psi(j, 1): 0.75 * 0.4 against 0.25 * 0.5
        CHECK(zero / n == doctest::Approx(0.3 / 0.425).epsilon(0.02));
    }

    TEST_CASE("constant missingness weights leave imputations unchanged") {
        RandomStream sim(4);
        const auto panel = mask_random(
            simulate_panel(presets::lee_matrix(), presets::lee_initial(), 100, 10, sim), 0.5, sim);
        RandomStream a(9), b(9);
        const TransitionMatrix lee(oracle::lee());
        GibbsState sa{lee, {}, initial_imputation(panel, lee, {}, a), 0};
        GibbsState sb{lee, Eigen::VectorXd::Constant(4, 0.37), initial_imputation(panel, lee, {}, b), 0};
        for (int k = 0; k < 5; ++k) {
            impute_step(sa, panel, {}, a, false);
            impute_step(sb, panel, {}, b, true);
        }
        CHECK(sa.imputed == sb.imputed);
    }

    TEST_CASE("imputation keeps observed cells and the support") {
        RandomStream sim(5);
        const auto panel = mask_random(
            simulate_panel(presets::turbine_matrix(), presets::turbine_initial(), 200, 7, sim), 0.3, sim);
        const auto t = presets::turbine_matrix();
        RandomStream rng(6);
        GibbsState s{t, {}, initial_imputation(panel, t, {}, rng), 0};
        for (int k = 0; k < 3; ++k) {
            CHECK(s.imputed.complete());
            CHECK_NOTHROW(count_transitions(s.imputed).check_support(t.support()));
            for (Eigen::Index i = 0; i < panel.individuals(); ++i) {
                for (int c = 0; c <= 7; ++c) {
                    if (!panel.missing(i, c)) CHECK(s.imputed.at(i, c) == panel.at(i, c));
                }
            }
            impute_step(s, panel, {}, rng, false);
        }
    }

    TEST_CASE("impossible observations are reported") {
        const TransitionMatrix lee(oracle::lee());
        RandomStream rng(7);
        CHECK_THROWS_AS(initial_imputation(one_row(4, {0, kMissing, 3}), lee, {}, rng), ImputationError);
        CHECK_THROWS_AS(initial_imputation(one_row(4, {0, 3}), lee, {}, rng), ImputationError);
    }

    TEST_CASE("parameter step counts transitions and missingness") {
        const auto panel = one_row(2, {0, kMissing, 1});
        GibbsState s{TransitionMatrix(Eigen::MatrixXd::Constant(2, 2, 0.5)), Eigen::VectorXd::Constant(2, 0.5),
                     one_row(2, {0, 0, 1}), 0};
        PriorSpec prior = PriorSpec::uniform(2);
        RandomStream rng(8);
        double eta0 = 0.0, eta1 = 0.0, psi00 = 0.0;
        const int n = 40000;
        for (int k = 0; k < n; ++k) {
            parameter_step(s, panel, prior, rng, true);
            eta0 += s.eta[0] / n;
            eta1 += s.eta[1] / n;
            psi00 += s.psi(0, 0) / n;
        }
        // state 1 is hidden once at t=1, state 2 observed once at t=2
        CHECK(eta0 == doctest::Approx(2.0 / 3.0).epsilon(0.01));
        CHECK(eta1 == doctest::Approx(1.0 / 3.0).epsilon(0.01));
        CHECK(psi00 == doctest::Approx(0.5).epsilon(0.01));
    }

    TEST_CASE("empty individuals are dropped and the prior is sampled") {
        const SequencePanel panel(3, Eigen::MatrixXi::Constant(5, 4, kMissing));
        GibbsConfig cfg;
        cfg.n_iter = 4000;
        cfg.n_chains = 2;
        const auto res = run_gibbs(panel, SupportMask::Constant(3, 3, true), PriorSpec::uniform(3), cfg, 11);
        CHECK(res.dropped == 5);
        CHECK(res.warnings.size() == 1);
        const auto mean = posterior_mean(res.chains, 0);
        CHECK((mean.array() - 1.0 / 3.0).abs().maxCoeff() < 0.02);
    }

    TEST_CASE("runs are reproducible and chains differ") {
        RandomStream sim(12);
        const auto panel = mask_random(
            simulate_panel(presets::lee_matrix(), presets::lee_initial(), 50, 8, sim), 0.5, sim);
        GibbsConfig cfg;
        cfg.n_iter = 200;
        cfg.monitor.check_interval = 20;
        const auto support = presets::lee_matrix().support();
        const auto a = run_gibbs(panel, support, PriorSpec::uniform(4), cfg, 5, oracle::lee_p0());
        const auto b = run_gibbs(panel, support, PriorSpec::uniform(4), cfg, 5, oracle::lee_p0());
        REQUIRE(a.chains.size() == 3);
        CHECK(a.chains[2].draws.back().psi == b.chains[2].draws.back().psi);
        CHECK(a.chains[0].draws.back().psi != a.chains[1].draws.back().psi);
        CHECK(a.diagnostics.points.size() == 10);
        for (const auto& d : a.chains[0].draws) CHECK_FALSE(validate(TransitionMatrix(d.psi, support)));
    }

    TEST_CASE("complete panels reproduce the conjugate marginals") {
        RandomStream sim(14);
        const auto panel = simulate_panel(presets::lee_matrix(), presets::lee_initial(), 60, 10, sim);
        const auto support = presets::lee_matrix().support();
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
        for (int k = 0; k < panel.individuals(); ++k) {
            for (int t = 1; t <= panel.horizon(); ++t) w(panel.at(k, t - 1), panel.at(k, t)) += 1.0;
        }
        GibbsConfig cfg;
        cfg.n_iter = 5000;
        const auto res = run_gibbs(panel, support, PriorSpec::uniform(4), cfg, 15, oracle::lee_p0());
        for (Eigen::Index i = 0; i < 3; ++i) {
            double total = 0.0;
            for (Eigen::Index j = 0; j < 4; ++j) total += support(i, j) ? 1.0 + w(i, j) : 0.0;
            for (Eigen::Index j = 0; j < 4; ++j) {
                if (!support(i, j)) continue;
                // Beta(a, total - a) marginal of a Dirichlet row
                const double a = 1.0 + w(i, j), b = total - a;
                const oracle::GridPosterior beta(
                    [&](double x) { return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x); }, 1e-9,
                    1.0 - 1e-9, 20001);
                std::vector<double> draws;
                for (const auto& c : res.chains) {
                    for (const auto& d : c.draws) draws.push_back(d.psi(i, j));
                }
                CHECK(oracle::ks_one_sample(draws, [&](double x) { return beta.cdf(x); }) < 0.02);
            }
        }
    }

    TEST_CASE("a point-mass missingness prior reproduces the ignorable posterior") {
        RandomStream sim(16);
        const auto panel = mask_random(
            simulate_panel(presets::lee_matrix(), presets::lee_initial(), 150, 10, sim), 0.6, sim);
        const auto support = presets::lee_matrix().support();
        GibbsConfig mar;
        mar.n_iter = 4000;
        GibbsConfig mnar = mar;
        mnar.mnar = true;
        PriorSpec tight = PriorSpec::uniform(4);
        tight.alpha.setConstant(1e7);
        tight.beta.setConstant(1e7);
        const auto a = run_gibbs(panel, support, PriorSpec::uniform(4), mar, 17, oracle::lee_p0());
        const auto b = run_gibbs(panel, support, tight, mnar, 18, oracle::lee_p0());
        for (const auto& c : b.chains) {
            for (const auto& d : c.draws) CHECK(std::abs(d.eta[0] - 0.5) < 0.01);
        }
        const Eigen::MatrixXd diff = posterior_mean(a.chains, 1000) - posterior_mean(b.chains, 1000);
        CHECK(diff.cwiseAbs().maxCoeff() < 0.015);
    }

    TEST_CASE("argument checks") {
        const SequencePanel panel = one_row(2, {0, 1});
        GibbsConfig cfg;
        cfg.n_iter = 10;
        cfg.mnar = true;
        PriorSpec prior = PriorSpec::uniform(2);
        prior.alpha.resize(0);
        CHECK_THROWS_AS(run_gibbs(panel, SupportMask::Constant(2, 2, true), prior, cfg, 1), ParameterError);
        cfg.mnar = false;
        CHECK_THROWS_AS(run_gibbs(panel, SupportMask::Constant(3, 3, true), PriorSpec::uniform(3), cfg, 1),
                        ParameterError);
    }
}
