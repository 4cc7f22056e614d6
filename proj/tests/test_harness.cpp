#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mkest/data_model.hpp"
#include "mkest/errors.hpp"
#include "mkest/harness.hpp"
#include "mkest/posterior.hpp"

using namespace mkest;
namespace fs = std::filesystem;
using harness::Config;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mkest_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MKEST_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE("harness") {
    TEST_CASE("config hashing and merging") {
        CHECK(harness::fnv1a("") == 0xcbf29ce484222325ULL);
        CHECK(harness::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
        const Config merged = harness::merge(Config{{"m", 10}, {"T", 5}}, Config{{"m", 20}});
        CHECK(merged["m"] == 20);
        CHECK(merged["T"] == 5);

        const auto dir = fresh_dir("config");
        std::ofstream(dir / "bad.json") << "{ nope";
        CHECK_THROWS_AS(harness::load_config(dir / "bad.json"), ConfigError);
        std::ofstream(dir / "list.json") << "[1, 2]";
        CHECK_THROWS_AS(harness::load_config(dir / "list.json"), ConfigError);
    }

    TEST_CASE("simulate writes tagged outputs and a manifest") {
        const auto dir = fresh_dir("simulate");
        const Config cfg{{"preset", "lee"}, {"m", 40}, {"T", 6}, {"mask", "single"}, {"seed", 3}};
        harness::cmd_simulate(cfg, dir);
        const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
        CHECK(manifest["seed"] == 3);
        for (const char* f : {"panel.csv", "complete.csv", "counts.csv", "truth.csv", "support.csv", "p0.csv"}) {
            REQUIRE(fs::exists(dir / f));
            const auto line = first_line(dir / f);
            CHECK(line.rfind("# mkest ", 0) == 0);
            CHECK(line.find("seed=3") != std::string::npos);
        }
        CHECK(fs::exists(dir / "manifest.json"));
        const auto panel = load_panel(dir / "panel.csv", 4);
        CHECK(panel.individuals() == 40);
        CHECK(panel.single_observation());
    }

    TEST_CASE("same seed and config give identical files") {
        const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
        const Config cfg{{"preset", "turbine"}, {"seed", 17}, {"mask", "random"}, {"keep_prob", 0.5}};
        harness::cmd_simulate(cfg, a);
        harness::cmd_simulate(cfg, b);
        CHECK(slurp(a / "panel.csv") == slurp(b / "panel.csv"));

        const Config fit{{"panel", (a / "panel.csv").string()}, {"support", (a / "support.csv").string()},
                         {"p0", (a / "p0.csv").string()}, {"n_iter", 300}, {"check_interval", 20}, {"seed", 5}};
        harness::cmd_fit(fit, a / "fit");
        harness::cmd_fit(fit, b / "fit");
        CHECK(slurp(a / "fit" / "posterior.csv") == slurp(b / "fit" / "posterior.csv"));
        const auto chains = read_posterior(a / "fit" / "posterior.csv");
        CHECK(chains.size() == 3);
    }

    TEST_CASE("failed commands leave no partial outputs") {
        const auto dir = fresh_dir("partial");
        harness::cmd_simulate(Config{{"preset", "lee"}, {"m", 30}, {"T", 4}, {"mask", "random"}, {"seed", 1}}, dir);
        const Config bad{{"panel", (dir / "panel.csv").string()}, {"support", (dir / "support.csv").string()},
                         {"method", "exact"}, {"seed", 1}};
        CHECK_THROWS_AS(harness::cmd_fit(bad, dir / "fit"), UnsupportedCombinationError);
        CHECK_FALSE(fs::exists(dir / "fit" / "posterior.csv"));
        CHECK_FALSE(fs::exists(dir / "fit" / "manifest.json"));
        {
            harness::OutputSet set(dir / "guard", "test", Config{{"seed", 2}});
            std::ofstream(set.add("x.csv")) << "1\n";
            CHECK(fs::exists(dir / "guard" / "x.csv"));
        }
        CHECK_FALSE(fs::exists(dir / "guard" / "x.csv"));
    }

    TEST_CASE("fit, predict and validate chain together") {
        const auto dir = fresh_dir("pipeline");
        harness::cmd_simulate(Config{{"preset", "turbine"}, {"seed", 4}}, dir);
        const Config fit{{"panel", (dir / "panel.csv").string()}, {"support", (dir / "support.csv").string()},
                         {"p0", Config::array({1, 0, 0, 0})}, {"method", "mh"}, {"n_iter", 600},
                         {"check_interval", 50}, {"seed", 4}};
        harness::cmd_fit(fit, dir / "fit");
        const auto summary = slurp(dir / "fit" / "summary.csv");
        CHECK(summary.find("entry,mean,sd,q025,q975") != std::string::npos);
        CHECK(summary.find("psi_1_1") != std::string::npos);

        harness::cmd_predict(Config{{"posterior", (dir / "fit" / "posterior.csv").string()}, {"horizon", 10},
                                    {"start", 1}, {"absorbing", 4}, {"burn_in", 100}, {"seed", 4}},
                             dir / "pred");
        CHECK(fs::exists(dir / "pred" / "bands.csv"));
        CHECK(slurp(dir / "pred" / "mttf.csv").find("iter,chain,mttf") != std::string::npos);

        CHECK(harness::cmd_validate(Config{{"posterior", (dir / "fit" / "posterior.csv").string()}}).empty());
        CHECK(harness::cmd_validate(Config{{"panel", (dir / "panel.csv").string()},
                                           {"support", (dir / "support.csv").string()}})
                  .empty());
        std::ofstream(dir / "bad.csv") << "0.5,0.6\n0,1\n";
        CHECK_FALSE(harness::cmd_validate(Config{{"matrix", (dir / "bad.csv").string()}}).empty());
    }

    TEST_CASE("command line exit codes") {
        const auto dir = fresh_dir("cli");
        const auto out = (dir / "sim").string();
        CHECK(run_cli("--version") == 0);
        CHECK(run_cli("simulate --preset lee --m 20 --T 4 --seed 2 -o " + out) == 0);
        CHECK(run_cli("simulate --bogus") == 1);
        CHECK(run_cli("fit --panel " + out + "/panel.csv --method nuts -o " + (dir / "f").string()) == 1);
        CHECK(run_cli("fit --panel " + (dir / "missing.csv").string() + " --states 4 -o " + (dir / "f").string()) == 2);
        CHECK(run_cli("validate --panel " + out + "/panel.csv --states 4") == 0);
        std::ofstream(dir / "bad.csv") << "0.5,0.6\n0,1\n";
        CHECK(run_cli("validate --matrix " + (dir / "bad.csv").string()) == 2);
        // lee's last state is not absorbing
        CHECK(run_cli("fit --panel " + out + "/complete.csv --support " + out + "/support.csv --method exact --n-iter 50 -o " +
                      (dir / "ex").string()) == 0);
        CHECK(run_cli("predict --posterior " + (dir / "ex").string() + "/posterior.csv --start 1 --absorbing 4 -o " +
                      (dir / "pr").string()) == 3);
    }
}
