#include "mkest/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "mkest/data_model.hpp"
#include "mkest/diagnostics.hpp"
#include "mkest/errors.hpp"
#include "mkest/exact.hpp"
#include "mkest/gibbs.hpp"
#include "mkest/markov_model.hpp"
#include "mkest/mh.hpp"
#include "mkest/posterior.hpp"
#include "mkest/simulate.hpp"

namespace fs = std::filesystem;

namespace mkest::harness {

namespace {

template <class T>
T get(const Config& c, const char* key, T fallback) {
    if (!c.contains(key) || c[key].is_null()) return fallback;
    try {
        return c[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

std::string hex64(std::uint64_t x) {
    std::ostringstream s;
    s << std::hex;
    s.width(16);
    s.fill('0');
    s << x;
    return s.str();
}

Eigen::VectorXd read_vector_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path.string());
    const auto rows = csv::read_rows(in);
    if (rows.size() != 1) {
        throw ParseError("expected a single row of probabilities", rows.empty() ? 1 : rows[1].line);
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows[0].fields.size()));
    for (std::size_t j = 0; j < rows[0].fields.size(); ++j) {
        const auto x = csv::parse_double(rows[0].fields[j]);
        if (!x) throw ParseError("not a number: '" + rows[0].fields[j] + "'", rows[0].line);
        v[static_cast<Eigen::Index>(j)] = *x;
    }
    return v;
}

void write_vector_file(const fs::path& path, const Eigen::VectorXd& v, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    out << "# " << comment << '\n';
    for (Eigen::Index j = 0; j < v.size(); ++j) out << (j ? "," : "") << csv::format_double(v[j]);
    out << '\n';
}

// Probability vector given inline or as a one-row CSV file.
std::optional<Eigen::VectorXd> vector_option(const Config& c, const char* key) {
    if (!c.contains(key) || c[key].is_null()) return std::nullopt;
    const auto& v = c[key];
    if (v.is_string()) return read_vector_file(v.get<std::string>());
    if (!v.is_array()) throw ConfigError(std::string("config key '") + key + "' must be a list or file");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (!v[j].is_number()) throw ConfigError(std::string("config key '") + key + "' must hold numbers");
        out[static_cast<Eigen::Index>(j)] = v[j].get<double>();
    }
    return out;
}

std::string entry_name(const char* prefix, Eigen::Index i, Eigen::Index j = -1) {
    std::string s = std::string(prefix) + "_" + std::to_string(i + 1);
    if (j >= 0) s += "_" + std::to_string(j + 1);
    return s;
}

void write_summary(const fs::path& path, const std::vector<EntrySummary>& psi,
                   const std::vector<EntrySummary>& eta, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    out << "# " << comment << '\n' << "entry,mean,sd,q025,q975\n";
    auto row = [&](const std::string& name, const EntrySummary& e) {
        out << name << ',' << csv::format_double(e.mean) << ',' << csv::format_double(e.sd) << ','
            << csv::format_double(e.lower) << ',' << csv::format_double(e.upper) << '\n';
    };
    for (const auto& e : psi) row(entry_name("psi", e.entry.row, e.entry.col), e);
    for (const auto& e : eta) row(entry_name("eta", e.entry.row), e);
}

Config trace_json(const DiagnosticTrace& trace) {
    Config j = Config::object();
    j["checks"] = trace.points.size();
    j["burn_in"] = trace.burn_in ? Config(*trace.burn_in) : Config(nullptr);
    if (!trace.points.empty()) j["last_max_psrf"] = trace.points.back().max_psrf;
    return j;
}

BurnInConfig monitor_config(const Config& c) {
    BurnInConfig m;
    m.check_interval = get<std::size_t>(c, "check_interval", m.check_interval);
    m.patience = get<std::size_t>(c, "patience", m.patience);
    m.threshold = get<double>(c, "threshold", m.threshold);
    return m;
}

MhConfig mh_config(const Config& c, KernelId kernel) {
    MhConfig m;
    m.kernel = kernel;
    if (c.contains("d_range")) {
        const auto d = vector_option(c, "d_range");
        if (!d || d->size() != 2) throw ConfigError("d_range must be [lo, hi]");
        m.d_lo = (*d)[0];
        m.d_hi = (*d)[1];
    }
    m.p_window = get<std::size_t>(c, "p_window", m.p_window);
    m.adapt_start = get<std::size_t>(c, "adapt_start", m.adapt_start);
    m.n_adapt = get<std::size_t>(c, "n_adapt", m.n_adapt);
    m.n_iter = get<std::size_t>(c, "n_iter", m.n_iter);
    m.n_chains = get<std::size_t>(c, "n_chains", m.n_chains);
    m.freeze_on_rt = get<bool>(c, "freeze_on_rt", m.freeze_on_rt);
    m.init_spread = get<double>(c, "init_spread", m.init_spread);
    m.init_candidates = get<std::size_t>(c, "init_candidates", m.init_candidates);
    m.monitor = monitor_config(c);
    return m;
}

GibbsConfig gibbs_config(const Config& c) {
    GibbsConfig g;
    g.n_iter = get<std::size_t>(c, "n_iter", g.n_iter);
    g.n_chains = get<std::size_t>(c, "n_chains", g.n_chains);
    g.mnar = get<bool>(c, "mnar", g.mnar);
    g.weight_initial = get<bool>(c, "weight_initial", g.weight_initial);
    g.monitor = monitor_config(c);
    return g;
}

PriorSpec prior_from(const Config& c, Eigen::Index r) {
    PriorSpec prior = PriorSpec::uniform(r);
    if (!c.contains("prior")) return prior;
    const auto& p = c["prior"];
    if (p.contains("gamma")) {
        if (p["gamma"].is_number()) {
            prior.gamma.setConstant(p["gamma"].get<double>());
        } else if (p["gamma"].is_string()) {
            prior.gamma = load_matrix(p["gamma"].get<std::string>()).entries();
        } else {
            throw ConfigError("prior.gamma must be a number or a matrix file");
        }
    }
    if (auto a = vector_option(p, "alpha")) prior.alpha = *a;
    if (auto b = vector_option(p, "beta")) prior.beta = *b;
    return prior;
}

// Matrix source for simulate: preset name or file.
struct Truth {
    TransitionMatrix matrix;
    Eigen::VectorXd p0;
    int default_m;
    int default_T;
    int default_first;
};

Truth truth_from(const Config& c, RandomStream& rng) {
    const auto preset = get<std::string>(c, "preset", "");
    if (preset == "lee") {
        return {presets::lee_matrix(), presets::lee_initial().probs(), 1200, 20, 1};
    }
    if (preset == "turbine") {
        return {presets::turbine_matrix(), presets::turbine_initial().probs(), 68, 7, 2};
    }
    if (preset == "rra") {
        const int r_max = get<int>(c, "r_max", 5);
        const int r = get<int>(c, "r", r_max);
        if (r_max < 3 || r < 3 || r > r_max) throw ConfigError("rra needs 3 <= r <= r_max");
        auto family = collapse_family(sample_rra_matrix(r_max, rng), r);
        Eigen::VectorXd p0 = Eigen::VectorXd::Zero(r);
        p0[0] = 1.0;
        return {family.back(), p0, 1000, 20, 1};
    }
    if (!preset.empty()) throw ConfigError("unknown preset '" + preset + "'");
    if (!c.contains("matrix")) throw ConfigError("simulate needs a preset or a matrix file");
    std::optional<fs::path> mask;
    if (c.contains("mask_file")) mask = get<std::string>(c, "mask_file", "");
    TransitionMatrix m = load_matrix(get<std::string>(c, "matrix", ""), mask);
    const auto r = m.states();
    return {m, Eigen::VectorXd::Constant(r, 1.0 / static_cast<double>(r)), 1000, 20, 1};
}

SequencePanel apply_mask(const SequencePanel& full, const Config& c, int default_first,
                         RandomStream& rng) {
    const auto scheme = get<std::string>(c, "mask", "single");
    if (scheme == "none") return full;
    if (scheme == "random") return mask_random(full, get<double>(c, "keep_prob", 0.5), rng);
    if (scheme == "single") {
        return mask_single_observation(full, rng, get<int>(c, "first", default_first),
                                       get<int>(c, "last", -1));
    }
    if (scheme == "mnar") {
        const auto eta = vector_option(c, "eta");
        if (!eta) throw ConfigError("mask 'mnar' needs eta");
        return mask_state_dependent(full, *eta, rng);
    }
    throw ConfigError("unknown mask scheme '" + scheme + "'");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Config load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        Config c = Config::parse(in, nullptr, true, true);
        if (!c.is_object()) throw ConfigError("config must be a JSON object");
        return c;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config does not parse: ") + e.what());
    }
}

Config merge(Config base, const Config& overrides) {
    if (base.is_null()) base = Config::object();
    base.merge_patch(overrides);
    return base;
}

OutputSet::OutputSet(fs::path dir, std::string command, const Config& config)
    : dir_(std::move(dir)), command_(std::move(command)), config_(config) {
    seed_ = get<std::uint64_t>(config_, "seed", 0);
    manifest_ = std::string("mkest ") + kVersion + " seed=" + std::to_string(seed_) +
                " config=" + hex64(fnv1a(config_.dump()));
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DomainError("cannot create output directory " + dir_.string());
}

OutputSet::~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
}

fs::path OutputSet::add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
}

void OutputSet::commit(const Config& extra) {
    Config m = {{"tool", "mkest"},     {"version", kVersion},
                {"command", command_}, {"seed", seed_},
                {"config_hash", hex64(fnv1a(config_.dump()))},
                {"config", config_}};
    Config names = Config::array();
    for (const auto& f : files_) names.push_back(f.filename().string());
    m["outputs"] = names;
    m.merge_patch(extra);
    const auto path = add("manifest.json");
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    out << m.dump(2) << '\n';
    committed_ = true;
}

Config cmd_simulate(const Config& config, const fs::path& out) {
    OutputSet files(out, "simulate", config);
    const auto seed = files.seed();
    RandomStream matrix_rng(seed, 0), path_rng(seed, 1), mask_rng(seed, 2);

    Truth truth = truth_from(config, matrix_rng);
    if (auto p0 = vector_option(config, "p0")) truth.p0 = *p0;
    if (auto v = validate(truth.matrix)) throw DomainError("invalid matrix: " + v->message);
    const int m = get<int>(config, "m", truth.default_m);
    const int T = get<int>(config, "T", truth.default_T);
    if (m < 0 || T < 1) throw ConfigError("m must be >= 0 and T >= 1");

    const SequencePanel full = simulate_panel(truth.matrix, StateDistribution(truth.p0),
                                              m, T, path_rng);
    const SequencePanel panel = apply_mask(full, config, truth.default_first, mask_rng);

    const auto& tag = files.manifest_line();
    save_panel(files.add("panel.csv"), panel, tag);
    save_panel(files.add("complete.csv"), full, tag);
    save_counts(files.add("counts.csv"), aggregate(panel), tag);
    save_matrix(files.add("truth.csv"), truth.matrix.entries(), tag);
    save_mask(files.add("support.csv"), truth.matrix.support(), tag);
    write_vector_file(files.add("p0.csv"), truth.p0, tag);

    Config extra = {{"individuals", m},
                    {"horizon", T},
                    {"states", truth.matrix.states()},
                    {"observed_cells", panel.observed_cells()},
                    {"single_observation", panel.single_observation()}};
    files.commit(extra);
    return extra;
}

Config cmd_fit(const Config& config, const fs::path& out) {
    OutputSet files(out, "fit", config);
    const auto seed = files.seed();
    const auto& tag = files.manifest_line();

    const bool has_panel = config.contains("panel");
    const bool has_counts = config.contains("counts");
    if (has_panel == has_counts) throw ConfigError("fit needs exactly one of panel or counts");

    std::optional<SupportMask> support;
    if (config.contains("support")) support = load_mask(get<std::string>(config, "support", ""));
    else if (config.contains("matrix")) support = load_matrix(get<std::string>(config, "matrix", "")).support();

    std::optional<SequencePanel> panel;
    std::optional<AggregateCounts> counts;
    int r = 0;
    if (has_panel) {
        std::optional<int> states;
        if (config.contains("states")) states = get<int>(config, "states", 0);
        else if (support) states = static_cast<int>(support->rows());
        panel = load_panel(get<std::string>(config, "panel", ""), states);
        r = panel->states();
    } else {
        counts = load_counts(get<std::string>(config, "counts", ""));
        r = counts->states();
    }
    if (!support) support = SupportMask::Constant(r, r, true);
    if (support->rows() != r) throw InconsistentDataError("support and data disagree on the number of states");

    const PriorSpec prior = prior_from(config, r);
    const auto p0 = vector_option(config, "p0");

    auto method = get<std::string>(config, "method", "auto");
    KernelId kernel = parse_kernel(get<std::string>(config, "kernel", "basic"));
    if (method != "auto" && method != "exact" && method != "gibbs" && method != "mh") {
        kernel = parse_kernel(method);  // throws on unknown names
        method = "mh";
    }
    const bool mnar = get<bool>(config, "mnar", false);
    if (method == "auto") {
        if (counts) method = "mh";
        else if (panel->complete() && !mnar) method = "exact";
        else method = "gibbs";
    }
    if (counts && method != "mh") {
        throw UnsupportedCombinationError("aggregate counts can only be fit with mh");
    }
    if (method == "exact" && !panel->complete()) {
        throw UnsupportedCombinationError("the exact posterior needs a complete panel");
    }
    if (method == "mh" && panel && !panel->single_observation() && !panel->complete()) {
        throw UnsupportedCombinationError(
            "mh works on aggregate or single-observation data; use gibbs for this panel");
    }
    if (mnar && method != "gibbs") throw UnsupportedCombinationError("mnar fits need gibbs");

    std::vector<PosteriorSample> chains;
    std::optional<DiagnosticTrace> trace;
    std::optional<std::size_t> detected;
    Config extra = {{"method", method}, {"states", r}};
    Config warnings = Config::array();

    if (method == "exact") {
        const auto post = conjugate_posterior(prior, count_transitions(*panel), *support);
        RandomStream rng(seed, 0);
        chains.push_back(sample_posterior(post, get<std::size_t>(config, "n_iter", 5000), rng));
    } else if (method == "gibbs") {
        const GibbsConfig g = gibbs_config(config);
        GibbsResult res = run_gibbs(*panel, *support, prior, g, seed, p0);
        chains = std::move(res.chains);
        trace = res.diagnostics;
        detected = res.burn_in;
        for (const auto& w : res.warnings) warnings.push_back(w);
    } else {
        if (!p0) throw ConfigError("mh fits need the initial law p0");
        const MhConfig m = mh_config(config, kernel);
        MhResult res = run_mh(counts ? *counts : aggregate(*panel), *support, prior, *p0, m, seed);
        chains = std::move(res.chains);
        trace = res.diagnostics;
        detected = res.burn_in;
        extra["kernel"] = kernel_name(kernel);
        extra["tau"] = res.tau ? Config(*res.tau) : Config(nullptr);
        Config stats = Config::array();
        for (const auto& s : res.stats) {
            stats.push_back({{"acceptance_rate", s.acceptance_rate()},
                             {"adaptive_proposals", s.adaptive_proposals},
                             {"basic_proposals", s.basic_proposals},
                             {"fallbacks", s.fallbacks},
                             {"underflows", s.underflows}});
        }
        extra["chains"] = stats;
    }

    std::size_t burn = 0;
    if (method != "exact") {
        const std::size_t n = chains.front().size();
        if (config.contains("burn_in") && config["burn_in"].is_number()) {
            burn = config["burn_in"].get<std::size_t>();
        } else if (detected) {
            burn = *detected;
        } else {
            burn = n / 2;
            warnings.push_back("burn-in not detected; summarizing the second half");
        }
        if (burn >= n) throw ConfigError("burn_in leaves no draws to summarize");
    }
    extra["burn_in"] = burn;
    extra["warnings"] = warnings;

    write_posterior(files.add("posterior.csv"), chains, tag);
    write_summary(files.add("summary.csv"), summarize(chains, burn),
                  mnar ? summarize_eta(chains, burn) : std::vector<EntrySummary>{}, tag);
    if (trace) {
        write_diagnostics(files.add("diagnostics.csv"), *trace, tag);
        extra["diagnostics"] = trace_json(*trace);
    }
    files.commit(extra);
    return extra;
}

Config cmd_predict(const Config& config, const fs::path& out) {
    OutputSet files(out, "predict", config);
    const auto& tag = files.manifest_line();
    if (!config.contains("posterior")) throw ConfigError("predict needs a posterior file");
    const auto chains = read_posterior(get<std::string>(config, "posterior", ""));
    if (chains.empty()) throw DomainError("posterior file holds no draws");
    const auto& support = chains.front().support;
    const Eigen::Index r = support.rows();
    const int horizon = get<int>(config, "horizon", 20);
    const auto burn = get<std::size_t>(config, "burn_in", 0);
    if (horizon < 0) throw ConfigError("horizon must be nonnegative");

    Eigen::VectorXd p0;
    if (auto p = vector_option(config, "p0")) {
        p0 = *p;
    } else {
        const int start = get<int>(config, "start", 1);
        if (start < 1 || start > r) throw ConfigError("start state out of range");
        p0 = Eigen::VectorXd::Zero(r);
        p0[start - 1] = 1.0;
    }
    if (p0.size() != r) throw ConfigError("p0 has the wrong number of states");
    StateDistribution check(p0);

    std::optional<Eigen::Index> absorbing;
    if (config.contains("absorbing")) {
        const int a = get<int>(config, "absorbing", 0);
        if (a < 1 || a > r) throw ConfigError("absorbing state out of range");
        absorbing = a - 1;
    }
    Eigen::Index start_state = 0;
    for (Eigen::Index j = 0; j < r; ++j) {
        if (p0[j] > p0[start_state]) start_state = j;
    }

    // paths[t * r + j] collects p_j(t) across draws
    std::vector<std::vector<double>> paths(static_cast<std::size_t>((horizon + 1) * r));
    std::vector<std::tuple<std::size_t, int, double>> mttf_rows;
    for (const auto& chain : chains) {
        for (std::size_t h = burn; h < chain.size(); ++h) {
            const Eigen::MatrixXd path = propagate_path(p0, chain.draws[h].psi, horizon);
            for (int t = 0; t <= horizon; ++t) {
                for (Eigen::Index j = 0; j < r; ++j) paths[static_cast<std::size_t>(t * r + j)].push_back(path(t, j));
            }
            if (absorbing) {
                const TransitionMatrix m(chain.draws[h].psi, support);
                Eigen::VectorXd times = absorption_times(m, *absorbing);
                mttf_rows.emplace_back(h, chain.chain, (p0.transpose() * times)(0));
            }
        }
    }
    if (paths.front().empty()) throw ConfigError("burn_in leaves no draws");

    {
        std::ofstream bands(files.add("bands.csv"));
        bands << "# " << tag << '\n' << "t,state,mean,q025,q975\n";
        for (int t = 0; t <= horizon; ++t) {
            for (Eigen::Index j = 0; j < r; ++j) {
                auto v = paths[static_cast<std::size_t>(t * r + j)];
                std::sort(v.begin(), v.end());
                double mean = 0.0;
                for (double x : v) mean += x;
                mean /= static_cast<double>(v.size());
                bands << t << ',' << j + 1 << ',' << csv::format_double(mean) << ','
                      << csv::format_double(sorted_quantile(v, 0.025)) << ','
                      << csv::format_double(sorted_quantile(v, 0.975)) << '\n';
            }
        }
    }
    Config extra = {{"draws", paths.front().size()}, {"horizon", horizon}};
    if (absorbing) {
        std::ofstream mttf(files.add("mttf.csv"));
        mttf << "# " << tag << '\n' << "iter,chain,mttf\n";
        std::vector<double> values;
        for (const auto& [h, c, v] : mttf_rows) {
            mttf << h << ',' << c << ',' << csv::format_double(v) << '\n';
            values.push_back(v);
        }
        std::sort(values.begin(), values.end());
        double mean = 0.0;
        for (double x : values) mean += x;
        extra["mttf"] = {{"mean", mean / static_cast<double>(values.size())},
                         {"q025", sorted_quantile(values, 0.025)},
                         {"q975", sorted_quantile(values, 0.975)},
                         {"start", start_state + 1},
                         {"absorbing", *absorbing + 1}};
    }
    files.commit(extra);
    return extra;
}

Config cmd_benchmark(const Config& config, const fs::path& out) {
    OutputSet files(out, "benchmark", config);
    const auto seed = files.seed();
    const auto& tag = files.manifest_line();

    const auto study = get<std::string>(config, "study", "lee");
    if (study != "lee" && study != "rra") throw ConfigError("study must be lee or rra");
    const auto methods = get<std::vector<std::string>>(config, "methods", {"mh", "rcs"});
    const auto grid = get<std::vector<int>>(
        config, "grid", study == "lee" ? std::vector<int>{100, 400, 800, 1200} : std::vector<int>{3, 4, 5, 6});
    const int repeats = get<int>(config, "repeats", 10);
    const int T = get<int>(config, "T", 20);
    const int m_fixed = get<int>(config, "m", 1000);
    const auto workers = std::max<std::size_t>(1, get<std::size_t>(config, "workers", 1));
    const std::size_t n_iter = get<std::size_t>(config, "n_iter", 20000);
    if (repeats < 1 || grid.empty() || methods.empty()) throw ConfigError("benchmark grid is empty");
    int r_max = 3;
    for (int v : grid) {
        if (study == "rra" && v < 3) throw ConfigError("rra grid values must be >= 3");
        if (study == "lee" && v < 1) throw ConfigError("lee grid values must be positive");
        r_max = std::max(r_max, v);
    }
    r_max = get<int>(config, "r_max", r_max);
    for (const auto& name : methods) {
        if (name != "gibbs" && name != "mh") parse_kernel(name);
    }

    struct Task {
        std::size_t method;
        std::size_t value;
        int repeat;
    };
    struct Row {
        std::optional<std::size_t> iterations;
        std::size_t ran = 0;
        double seconds = 0.0;
        double rel_error = 0.0;
    };
    std::vector<Task> tasks;
    for (std::size_t a = 0; a < methods.size(); ++a) {
        for (std::size_t b = 0; b < grid.size(); ++b) {
            for (int k = 0; k < repeats; ++k) tasks.push_back({a, b, k});
        }
    }
    std::vector<Row> rows(tasks.size());

    auto run_task = [&](const Task& task) {
        const int value = grid[task.value];
        // Data depend on (grid value, repeat) only, so methods see the same datasets.
        const std::uint64_t data_seed =
            mix64(seed ^ mix64(static_cast<std::uint64_t>(value) << 32 | static_cast<std::uint32_t>(task.repeat)));
        RandomStream rng(data_seed, 0);
        std::optional<TransitionMatrix> truth;
        Eigen::VectorXd p0;
        int m = m_fixed;
        if (study == "lee") {
            truth = presets::lee_matrix();
            p0 = presets::lee_initial().probs();
            m = value;
        } else {
            truth = collapse_family(sample_rra_matrix(r_max, rng), value).back();
            p0 = Eigen::VectorXd::Zero(value);
            p0[0] = 1.0;
        }
        const SequencePanel panel = mask_single_observation(
            simulate_panel(*truth, StateDistribution(p0), m, T, rng), rng);
        const PriorSpec prior = PriorSpec::uniform(truth->states());

        const auto& name = methods[task.method];
        const auto start = std::chrono::steady_clock::now();
        std::vector<PosteriorSample> chains;
        std::optional<std::size_t> burn;
        if (name == "gibbs") {
            GibbsConfig g = gibbs_config(config);
            g.n_iter = n_iter;
            g.stop_at_rt = true;
            auto res = run_gibbs(panel, truth->support(), prior, g, mix64(data_seed + 1), p0);
            chains = std::move(res.chains);
            burn = res.burn_in;
        } else {
            MhConfig mc = mh_config(config, name == "mh" ? KernelId::Basic : parse_kernel(name));
            mc.n_iter = n_iter;
            mc.stop_at_rt = true;
            auto res = run_mh(aggregate(panel), truth->support(), prior, p0, mc, mix64(data_seed + 1));
            chains = std::move(res.chains);
            burn = res.burn_in;
        }
        Row row;
        row.seconds = seconds_since(start);
        row.iterations = burn;
        row.ran = chains.front().size();
        const Eigen::MatrixXd mean = posterior_mean(chains, burn ? *burn : row.ran / 2);
        row.rel_error = error_metrics(TransitionMatrix(mean, truth->support()), *truth).relative_euclidean;
        return row;
    };

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            try {
                rows[t] = run_task(tasks[t]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(workers, tasks.size()); ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    const char* param = study == "lee" ? "m" : "r";
    {
        std::ofstream runs(files.add("runs.csv"));
        runs << "# " << tag << '\n'
             << "method,param,value,repeat,iterations_to_rt,iterations_run,wall_seconds,rel_error\n";
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            const auto& row = rows[t];
            runs << methods[tasks[t].method] << ',' << param << ',' << grid[tasks[t].value] << ','
                 << tasks[t].repeat << ',' << (row.iterations ? std::to_string(*row.iterations) : "NA")
                 << ',' << row.ran << ',' << csv::format_double(row.seconds) << ','
                 << csv::format_double(row.rel_error) << '\n';
        }
    }
    Config cells = Config::array();
    {
        std::ofstream summary(files.add("summary.csv"));
        summary << "# " << tag << '\n'
                << "method,param,value,runs,reached,iter_q1,iter_median,iter_q3,time_q1,time_median,time_q3\n";
        for (std::size_t a = 0; a < methods.size(); ++a) {
            for (std::size_t b = 0; b < grid.size(); ++b) {
                std::vector<double> iters, secs;
                int reached = 0;
                for (std::size_t t = 0; t < tasks.size(); ++t) {
                    if (tasks[t].method != a || tasks[t].value != b) continue;
                    // runs that never reach the threshold count as the full budget
                    iters.push_back(static_cast<double>(rows[t].iterations.value_or(n_iter)));
                    secs.push_back(rows[t].seconds);
                    reached += rows[t].iterations.has_value();
                }
                std::sort(iters.begin(), iters.end());
                std::sort(secs.begin(), secs.end());
                const double med = sorted_quantile(iters, 0.5);
                summary << methods[a] << ',' << param << ',' << grid[b] << ',' << iters.size() << ','
                        << reached << ',' << csv::format_double(sorted_quantile(iters, 0.25)) << ','
                        << csv::format_double(med) << ','
                        << csv::format_double(sorted_quantile(iters, 0.75)) << ','
                        << csv::format_double(sorted_quantile(secs, 0.25)) << ','
                        << csv::format_double(sorted_quantile(secs, 0.5)) << ','
                        << csv::format_double(sorted_quantile(secs, 0.75)) << '\n';
                cells.push_back({{"method", methods[a]}, {"value", grid[b]},
                                 {"median_iterations", med}, {"reached", reached}});
            }
        }
    }
    Config extra = {{"cells", cells}, {"tasks", tasks.size()}};
    files.commit(extra);
    return extra;
}

std::vector<std::string> cmd_validate(const Config& config) {
    std::vector<std::string> problems;
    if (config.contains("matrix")) {
        std::optional<fs::path> mask;
        if (config.contains("mask_file")) mask = get<std::string>(config, "mask_file", "");
        const auto m = load_matrix(get<std::string>(config, "matrix", ""), mask);
        if (auto v = validate(m)) {
            problems.push_back("row " + std::to_string(v->row + 1) +
                               (v->col >= 0 ? ", column " + std::to_string(v->col + 1) : "") + ": " +
                               v->message);
        }
    } else if (config.contains("panel")) {
        std::optional<int> states;
        if (config.contains("states")) states = get<int>(config, "states", 0);
        const auto panel = load_panel(get<std::string>(config, "panel", ""), states);
        for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
            if (panel.observed_in_row(k) == 0) {
                problems.push_back("individual " + std::to_string(k + 1) + " has no observation");
            }
        }
        if (config.contains("support")) {
            const auto support = load_mask(get<std::string>(config, "support", ""));
            for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
                for (int t = 1; t <= panel.horizon(); ++t) {
                    if (panel.missing(k, t - 1) || panel.missing(k, t)) continue;
                    if (!support(panel.at(k, t - 1), panel.at(k, t))) {
                        problems.push_back("individual " + std::to_string(k + 1) + ", t=" +
                                           std::to_string(t) + ": forbidden transition");
                    }
                }
            }
        }
    } else if (config.contains("counts")) {
        load_counts(get<std::string>(config, "counts", ""));
    } else if (config.contains("posterior")) {
        for (const auto& chain : read_posterior(get<std::string>(config, "posterior", ""))) {
            for (std::size_t h = 0; h < chain.size(); ++h) {
                if (auto v = validate(TransitionMatrix(chain.draws[h].psi, chain.support))) {
                    problems.push_back("chain " + std::to_string(chain.chain) + ", iter " +
                                       std::to_string(h) + ": " + v->message);
                }
            }
        }
    } else {
        throw ConfigError("validate needs a matrix, panel, counts or posterior file");
    }
    return problems;
}

}  // namespace mkest::harness
