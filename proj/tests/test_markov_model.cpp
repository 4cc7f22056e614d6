#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mkest/errors.hpp"
#include "mkest/markov_model.hpp"
#include "mkest/random.hpp"
#include "mkest/simulate.hpp"
#include "oracles.hpp"

using namespace mkest;

namespace {

Eigen::MatrixXd mat(int r, std::initializer_list<double> xs) {
    Eigen::MatrixXd m(r, r);
    auto it = xs.begin();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) m(i, j) = *it++;
    return m;
}

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "mkest_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_SUITE("markov_model") {
    TEST_CASE("validate") {
        CHECK_FALSE(validate(TransitionMatrix(Eigen::MatrixXd::Identity(3, 3),
                                              SupportMask::Constant(3, 3, true))));
        const auto bad = validate(TransitionMatrix(mat(2, {0.5, 0.6, 0.0, 1.0})));
        REQUIRE(bad);
        CHECK(bad->row == 0);
        CHECK_FALSE(validate(TransitionMatrix(oracle::lee())));
        SupportMask s = SupportMask::Constant(2, 2, true);
        s(0, 1) = false;
        const auto off = validate(TransitionMatrix(mat(2, {0.5, 0.5, 0.5, 0.5}), s));
        REQUIRE(off);
        CHECK(off->col == 1);
        CHECK(validate(TransitionMatrix(mat(2, {1.2, -0.2, 0.5, 0.5}))));
    }

    TEST_CASE("support structure") {
        const TransitionMatrix m(oracle::lee());
        CHECK(m.row_support(0) == 2);
        CHECK(m.row_support(1) == 3);
        CHECK(m.supported_entries().size() == 10);
        CHECK(m.free_rows().size() == 4);
        CHECK_FALSE(m.is_upper_triangular());
        const TransitionMatrix t = presets::turbine_matrix();
        CHECK(t.is_upper_triangular());
        CHECK(t.is_fixed_row(3));
        CHECK(t.free_entries().size() == 9);
        const auto u = uniform_on_support(t.support());
        CHECK(u(1, 1) == doctest::Approx(1.0 / 3.0));
        CHECK(u(3, 3) == 1.0);
    }

    TEST_CASE("propagate") {
        const TransitionMatrix psi(oracle::lee());
        const StateDistribution p0(oracle::lee_p0());
        CHECK(propagate(p0, psi, 0).probs() == p0.probs());
        const auto p1 = propagate(p0, psi, 1).probs();
        CHECK(p1[0] == doctest::Approx(0.475));
        CHECK(p1[1] == doctest::Approx(0.425));
        CHECK(p1[2] == doctest::Approx(0.1));
        CHECK(p1[3] == doctest::Approx(0.0));
        CHECK(propagate(p0, psi, 1).time() == 1);
        const auto direct = propagate(p0, psi, 7).probs();
        const auto split = propagate(propagate(p0, psi, 3), psi, 4).probs();
        CHECK((direct - split).cwiseAbs().maxCoeff() < 1e-14);
        const auto path = propagate_path(p0.probs(), psi.entries(), 7);
        CHECK((path.row(7).transpose() - direct).cwiseAbs().maxCoeff() < 1e-14);
    }

    TEST_CASE("propagate matches simulated trajectories") {
        const auto freq = oracle::trajectory_frequencies(oracle::lee(), oracle::lee_p0(), 5, 200000, 3);
        const auto p5 = propagate(StateDistribution(oracle::lee_p0()), TransitionMatrix(oracle::lee()), 5);
        CHECK((freq.row(5).transpose() - p5.probs()).cwiseAbs().maxCoeff() < 0.005);
    }

    TEST_CASE("first-state probability of an irreversible chain is a power") {
        const TransitionMatrix t = presets::turbine_matrix();
        const StateDistribution p0(Eigen::Vector4d(1, 0, 0, 0));
        for (int k = 0; k <= 12; ++k) {
            CHECK(propagate(p0, t, k).probs()[0] == doctest::Approx(std::pow(t(0, 0), k)).epsilon(1e-13));
        }
    }

    TEST_CASE("state distribution validation") {
        CHECK_THROWS_AS(StateDistribution(Eigen::Vector2d(0.5, 0.6)), ParameterError);
        CHECK_THROWS_AS(StateDistribution(Eigen::Vector2d(1.5, -0.5)), ParameterError);
        CHECK_THROWS_AS(StateDistribution(Eigen::Vector2d(0.5, 0.5), -1), ParameterError);
    }

    TEST_CASE("mean time to absorption") {
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(4, 4);
        z.col(3).setOnes();
        const TransitionMatrix direct(z);
        CHECK(mttf(direct, 3, 0) == doctest::Approx(1.0));
        const auto times = absorption_times(direct, 3);
        CHECK(times[0] == doctest::Approx(1.0));
        CHECK(times[2] == doctest::Approx(1.0));
        CHECK(times[3] == 0.0);
        CHECK(mttf(TransitionMatrix(mat(2, {0.5, 0.5, 0, 1})), 1, 0) == doctest::Approx(2.0));

        // row sums of the fundamental matrix: from s1, 1/(1-a) + visits to s2
        const TransitionMatrix chain(mat(3, {0.5, 0.5, 0.0, 0.0, 0.8, 0.2, 0, 0, 1}));
        CHECK(mttf(chain, 2, 0) == doctest::Approx(2.0 + 5.0));
        CHECK(mttf(chain, 2, 1) == doctest::Approx(5.0));
    }

    TEST_CASE("mttf is invariant under relabelling transient states") {
        const TransitionMatrix a(mat(3, {0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0, 0, 1}));
        const TransitionMatrix b(mat(3, {0.6, 0.1, 0.3, 0.3, 0.5, 0.2, 0, 0, 1}));
        CHECK(mttf(a, 2, 0) == doctest::Approx(mttf(b, 2, 1)));
        CHECK(mttf(a, 2, 1) == doctest::Approx(mttf(b, 2, 0)));
    }

    TEST_CASE("mttf matches simulated absorption times") {
        const TransitionMatrix t = presets::turbine_matrix();
        const double mc = oracle::absorption_time(t.entries(), 0, 3, 200000, 5);
        CHECK(mttf(t, 3, 0) == doctest::Approx(mc).epsilon(0.01));
    }

    TEST_CASE("non-absorbing targets are rejected") {
        const TransitionMatrix lee(oracle::lee());
        CHECK_THROWS_AS(mttf(lee, 3, 0), NonAbsorbingError);
        // s2 is a trap that never reaches s3
        const TransitionMatrix trap(mat(3, {0.5, 0.5, 0.0, 0.0, 1.0, 0.0, 0, 0, 1}));
        CHECK_THROWS_AS(mttf(trap, 2, 0), NonAbsorbingError);
    }

    TEST_CASE("matrix files round-trip") {
        const auto path = temp_file("lee.csv");
        save_matrix(path, oracle::lee(), "test");
        const auto back = load_matrix(path);
        CHECK(back.entries() == oracle::lee());
        CHECK(back.support() == TransitionMatrix(oracle::lee()).support());

        SupportMask mask = SupportMask::Constant(4, 4, true);
        const auto mpath = temp_file("mask.csv");
        save_mask(mpath, mask);
        CHECK(load_matrix(path, mpath).support() == mask);
        CHECK(load_mask(mpath) == mask);

        std::ofstream(temp_file("ragged.csv")) << "0.5,0.5\n1\n";
        CHECK_THROWS_AS(load_matrix(temp_file("ragged.csv")), ParseError);
        std::ofstream(temp_file("text.csv")) << "0.5,x\n0,1\n";
        CHECK_THROWS_AS(load_matrix(temp_file("text.csv")), ParseError);
    }
}
