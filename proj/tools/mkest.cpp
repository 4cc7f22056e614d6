// Command-line front end: simulate, fit, predict, benchmark, validate.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "mkest/errors.hpp"
#include "mkest/harness.hpp"

namespace {

using mkest::harness::Config;

int exit_code(mkest::ErrorCategory c) {
    switch (c) {
        case mkest::ErrorCategory::Usage: return 1;
        case mkest::ErrorCategory::Data: return 2;
        case mkest::ErrorCategory::Numerical: return 3;
    }
    return 3;
}

// "0.75,0.25,0,0" becomes a JSON list; anything else is taken as a file name.
Config list_or_path(const std::string& text) {
    Config list = Config::array();
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string item = text.substr(start, comma - start);
        char* end = nullptr;
        const double x = std::strtod(item.c_str(), &end);
        if (item.empty() || *end != '\0') return text;
        list.push_back(x);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return list;
}

// Collects flag values and writes only the ones given on the command line.
class Flags {
public:
    explicit Flags(CLI::App* app) : app_(app) {}

    template <class T>
    void add(const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<T>();
        auto* opt = app_->add_option(flag, *value, help);
        setters_.push_back([opt, value, key](Config& c) {
            if (opt->count()) c[key] = *value;
        });
    }
    void add_list(const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<std::string>();
        auto* opt = app_->add_option(flag, *value, help);
        setters_.push_back([opt, value, key](Config& c) {
            if (opt->count()) c[key] = list_or_path(*value);
        });
    }
    void add_switch(const std::string& flag, const std::string& key, bool value,
                    const std::string& help) {
        auto* opt = app_->add_flag(flag, help);
        setters_.push_back([opt, key, value](Config& c) {
            if (opt->count()) c[key] = value;
        });
    }
    Config overrides() const {
        Config c = Config::object();
        for (const auto& s : setters_) s(c);
        return c;
    }

private:
    CLI::App* app_;
    std::vector<std::function<void(Config&)>> setters_;
};

struct Command {
    CLI::App* app;
    Flags flags;
    std::string config_file;
    std::string out = "out";
};

Command& make_command(std::map<std::string, Command>& commands, CLI::App& root,
                      const std::string& name, const std::string& help, bool has_out) {
    auto* sub = root.add_subcommand(name, help);
    auto& cmd = commands.emplace(name, Command{sub, Flags(sub), {}, "out"}).first->second;
    sub->add_option("-c,--config", cmd.config_file, "JSON config file; flags override it");
    cmd.flags.add<std::uint64_t>("--seed", "seed", "master seed");
    if (has_out) sub->add_option("-o,--out", cmd.out, "output directory");
    return cmd;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian estimation of Markov transition matrices from incomplete data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", mkest::harness::kVersion);
    std::map<std::string, Command> commands;

    auto& sim = make_command(commands, app, "simulate", "generate a data set", true);
    sim.flags.add<std::string>("--preset", "preset", "lee, turbine or rra");
    sim.flags.add<std::string>("--matrix", "matrix", "transition matrix CSV");
    sim.flags.add<std::string>("--mask-file", "mask_file", "support mask CSV for --matrix");
    sim.flags.add<int>("--m", "m", "number of individuals");
    sim.flags.add<int>("--T", "T", "last observation time");
    sim.flags.add<std::string>("--mask", "mask", "none, random, single or mnar");
    sim.flags.add<double>("--keep-prob", "keep_prob", "retention probability for --mask random");
    sim.flags.add<int>("--first", "first", "earliest time kept by --mask single");
    sim.flags.add<int>("--last", "last", "latest time kept by --mask single");
    sim.flags.add_list("--eta", "eta", "missingness probability per state for --mask mnar");
    sim.flags.add_list("--p0", "p0", "initial law, as a list or a CSV file");
    sim.flags.add<int>("--r-max", "r_max", "size of the sampled RRA matrix");
    sim.flags.add<int>("--r", "r", "collapse the RRA matrix to r states");

    auto& fit = make_command(commands, app, "fit", "sample the posterior of a data set", true);
    fit.flags.add<std::string>("--panel", "panel", "panel CSV");
    fit.flags.add<std::string>("--counts", "counts", "aggregate counts CSV");
    fit.flags.add<std::string>("--support", "support", "support mask CSV");
    fit.flags.add<int>("--states", "states", "number of states");
    fit.flags.add_list("--p0", "p0", "initial law, as a list or a CSV file");
    fit.flags.add<std::string>("--method", "method", "auto, exact, gibbs, mh or an MH kernel name");
    fit.flags.add<std::string>("--kernel", "kernel", "basic, dcs, rcs, dcs-coarse or rcs-coarse");
    fit.flags.add<std::size_t>("--n-iter", "n_iter", "iterations per chain");
    fit.flags.add<std::size_t>("--n-chains", "n_chains", "number of chains");
    fit.flags.add<std::size_t>("--burn-in", "burn_in", "draws discarded per chain (default: detected)");
    fit.flags.add<std::size_t>("--check-interval", "check_interval", "iterations between convergence checks");
    fit.flags.add<std::size_t>("--patience", "patience", "consecutive checks below the threshold");
    fit.flags.add_switch("--mnar", "mnar", true, "model state-dependent missingness");
    fit.flags.add_switch("--uniform-initial", "weight_initial", false,
                         "do not weight t=0 imputations by p0");

    auto& pred = make_command(commands, app, "predict", "state probabilities and MTTF from a posterior", true);
    pred.flags.add<std::string>("--posterior", "posterior", "posterior CSV written by fit");
    pred.flags.add<int>("--horizon", "horizon", "last time to predict");
    pred.flags.add<int>("--absorbing", "absorbing", "absorbing state for MTTF");
    pred.flags.add<int>("--start", "start", "starting state when --p0 is not given");
    pred.flags.add_list("--p0", "p0", "initial law, as a list or a CSV file");
    pred.flags.add<std::size_t>("--burn-in", "burn_in", "draws discarded per chain");

    auto& bench = make_command(commands, app, "benchmark", "iterations to convergence per method", true);
    bench.flags.add<std::string>("--study", "study", "lee or rra");
    bench.flags.add<std::vector<std::string>>("--methods", "methods", "gibbs, mh, dcs, rcs, dcs-coarse, rcs-coarse");
    bench.flags.add<std::vector<int>>("--grid", "grid", "m values (lee) or r values (rra)");
    bench.flags.add<int>("--repeats", "repeats", "repeats per cell");
    bench.flags.add<int>("--m", "m", "individuals per data set (rra)");
    bench.flags.add<int>("--T", "T", "last observation time");
    bench.flags.add<std::size_t>("--n-iter", "n_iter", "iteration budget per run");
    bench.flags.add<std::size_t>("--workers", "workers", "concurrent runs");

    auto& val = make_command(commands, app, "validate", "check a data file", false);
    val.flags.add<std::string>("--matrix", "matrix", "transition matrix CSV");
    val.flags.add<std::string>("--mask-file", "mask_file", "support mask CSV for --matrix");
    val.flags.add<std::string>("--panel", "panel", "panel CSV");
    val.flags.add<int>("--states", "states", "number of states of --panel");
    val.flags.add<std::string>("--support", "support", "support mask CSV checked against --panel");
    val.flags.add<std::string>("--counts", "counts", "aggregate counts CSV");
    val.flags.add<std::string>("--posterior", "posterior", "posterior CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        for (auto& [name, cmd] : commands) {
            if (!cmd.app->parsed()) continue;
            Config config = cmd.config_file.empty() ? Config::object()
                                                    : mkest::harness::load_config(cmd.config_file);
            config = mkest::harness::merge(config, cmd.flags.overrides());

            if (name == "validate") {
                const auto problems = mkest::harness::cmd_validate(config);
                for (const auto& p : problems) std::cout << p << '\n';
                if (problems.empty()) std::cout << "ok\n";
                return problems.empty() ? 0 : 2;
            }
            Config result;
            if (name == "simulate") result = mkest::harness::cmd_simulate(config, cmd.out);
            if (name == "fit") result = mkest::harness::cmd_fit(config, cmd.out);
            if (name == "predict") result = mkest::harness::cmd_predict(config, cmd.out);
            if (name == "benchmark") result = mkest::harness::cmd_benchmark(config, cmd.out);
            std::cout << result.dump(2) << '\n';
        }
    } catch (const mkest::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
