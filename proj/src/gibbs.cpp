#include "mkest/gibbs.hpp"

#include <cassert>
#include <string>

#include "mkest/errors.hpp"
#include "mkest/prob_kernel.hpp"

namespace mkest {

namespace {

std::string cell_name(Eigen::Index k, int t) {
    return "individual " + std::to_string(k + 1) + ", t=" + std::to_string(t);
}

// Index drawn with probability w_j / sum(w); -1 when every weight is zero.
int draw_index(const std::vector<double>& w, RandomStream& rng) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) return -1;
    double u = rng.uniform() * total;
    int last = -1;
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (w[j] <= 0.0) continue;
        last = static_cast<int>(j);
        if (u < w[j]) return last;
        u -= w[j];
    }
    return last;
}

Eigen::MatrixXd prior_mean(const PriorSpec& prior, const SupportMask& support) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(support.rows(), support.cols());
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < support.cols(); ++j) {
            if (support(i, j)) total += prior.gamma(i, j);
        }
        for (Eigen::Index j = 0; j < support.cols(); ++j) {
            if (support(i, j)) m(i, j) = prior.gamma(i, j) / total;
        }
    }
    return m;
}

}  // namespace

void GibbsConfig::check() const {
    if (n_iter < 1) throw ConfigError("n_iter must be positive");
    if (n_chains < 1) throw ConfigError("n_chains must be positive");
    if (monitor.check_interval < 8) throw ConfigError("check_interval must be at least 8");
    if (monitor.patience < 1) throw ConfigError("patience must be at least 1");
    if (!(monitor.threshold > 1.0)) throw ConfigError("psrf threshold must exceed 1");
}

void impute_step(GibbsState& state, const SequencePanel& panel,
                 const std::optional<Eigen::VectorXd>& initial, RandomStream& rng, bool mnar) {
    const Eigen::MatrixXd& psi = state.psi.entries();
    const int r = panel.states();
    const int T = panel.horizon();
    std::vector<double> w(static_cast<std::size_t>(r));
    auto& y = state.imputed;

    for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
        for (int t = 0; t <= T; ++t) {
            if (!panel.missing(k, t)) {
                assert(y.at(k, t) == panel.at(k, t));
                continue;
            }
            for (int j = 0; j < r; ++j) {
                double x = 1.0;
                if (t == 0) {
                    if (initial) x = (*initial)[j];
                } else {
                    x = psi(y.at(k, t - 1), j);
                    if (mnar) x *= state.eta[j];
                }
                if (t < T) x *= psi(j, y.at(k, t + 1));
                w[static_cast<std::size_t>(j)] = x;
            }
            const int s = draw_index(w, rng);
            if (s < 0) throw ImputationError("no state is possible at " + cell_name(k, t));
            y.set(k, t, s);
        }
    }
}

void parameter_step(GibbsState& state, const SequencePanel& panel, const PriorSpec& prior,
                    RandomStream& rng, bool mnar) {
    const SupportMask& support = state.psi.support();
    const TransitionCounts counts = count_transitions(state.imputed);
    const RowwisePosterior post = conjugate_posterior(prior, counts, support);
    state.psi = TransitionMatrix(draw_matrix(post, rng), support);

    if (!mnar) return;
    const int r = panel.states();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(r);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(r);
    for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
        for (int t = 1; t <= panel.horizon(); ++t) {
            const int s = state.imputed.at(k, t);
            (panel.missing(k, t) ? a : b)[s] += 1.0;
        }
    }
    state.eta.resize(r);
    for (int i = 0; i < r; ++i) state.eta[i] = rng.beta(prior.alpha[i] + a[i], prior.beta[i] + b[i]);
}

SequencePanel initial_imputation(const SequencePanel& panel, const TransitionMatrix& matrix,
                                 const std::optional<Eigen::VectorXd>& initial,
                                 RandomStream& rng) {
    const int r = panel.states();
    const int T = panel.horizon();
    const Eigen::MatrixXd& Q = matrix.entries();

    // reach[n].col(y)[i] = P(x_{t+n} = y | x_t = i)
    std::vector<Eigen::MatrixXd> reach{Eigen::MatrixXd::Identity(r, r)};
    for (int n = 1; n <= T; ++n) reach.push_back(Q * reach.back());

    const Eigen::VectorXd start =
        initial ? *initial : Eigen::VectorXd::Constant(r, 1.0 / static_cast<double>(r));
    std::vector<double> w(static_cast<std::size_t>(r));
    SequencePanel out = panel;

    for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
        int next_obs = 0;
        while (next_obs <= T && panel.missing(k, next_obs)) ++next_obs;

        for (int t = 0; t <= T; ++t) {
            if (t == next_obs) {
                if (t > 0 && Q(out.at(k, t - 1), panel.at(k, t)) <= 0.0) {
                    throw ImputationError("observed states cannot be joined at " + cell_name(k, t));
                }
                if (t == 0 && initial && (*initial)[panel.at(k, 0)] <= 0.0) {
                    throw ImputationError("observed state has zero initial probability at " +
                                          cell_name(k, 0));
                }
                ++next_obs;
                while (next_obs <= T && panel.missing(k, next_obs)) ++next_obs;
                continue;
            }
            for (int j = 0; j < r; ++j) {
                double x = t == 0 ? start[j] : Q(out.at(k, t - 1), j);
                if (next_obs <= T) x *= reach[next_obs - t](j, panel.at(k, next_obs));
                w[static_cast<std::size_t>(j)] = x;
            }
            const int s = draw_index(w, rng);
            if (s < 0) throw ImputationError("no completion reaches the observation after " + cell_name(k, t));
            out.set(k, t, s);
        }
    }
    return out;
}

GibbsResult run_gibbs(const SequencePanel& panel, const SupportMask& support,
                      const PriorSpec& prior, const GibbsConfig& config, std::uint64_t seed,
                      const std::optional<Eigen::VectorXd>& initial) {
    config.check();
    if (support.rows() != panel.states() || support.cols() != panel.states()) {
        throw ParameterError("support and panel disagree on the number of states");
    }
    prior.check(support);
    if (config.mnar && (prior.alpha.size() != panel.states() || prior.beta.size() != panel.states())) {
        throw ParameterError("MNAR fits need Beta hyperparameters for every state");
    }
    if (initial) {
        if (initial->size() != panel.states()) throw ParameterError("initial law has the wrong size");
        StateDistribution check(*initial);
    }
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
        if (support.row(i).count() == 0) {
            throw StructureError("row " + std::to_string(i + 1) + " has no allowed entry");
        }
    }

    GibbsResult result;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
        if (panel.observed_in_row(k) > 0) keep.push_back(k);
    }
    result.dropped = panel.individuals() - static_cast<Eigen::Index>(keep.size());
    if (result.dropped > 0) {
        result.warnings.push_back("dropped " + std::to_string(result.dropped) +
                                  " individuals with no observed state");
    }
    Eigen::MatrixXi table(static_cast<Eigen::Index>(keep.size()), panel.horizon() + 1);
    for (std::size_t n = 0; n < keep.size(); ++n) table.row(static_cast<Eigen::Index>(n)) = panel.table().row(keep[n]);
    const SequencePanel data(panel.states(), std::move(table));

    const TransitionMatrix start(prior_mean(prior, support), support);
    const auto free = start.free_entries();
    const int r = panel.states();

    std::vector<GibbsState> states;
    std::vector<RandomStream> streams;
    for (std::size_t c = 0; c < config.n_chains; ++c) {
        streams.emplace_back(seed, c);
        GibbsState s{start, {}, initial_imputation(data, start, initial, streams.back()), 0};
        if (config.mnar) s.eta = Eigen::VectorXd::Constant(r, 0.5);
        states.push_back(std::move(s));
        result.chains.push_back(PosteriorSample{static_cast<int>(c), support, {}});
        result.chains.back().draws.reserve(config.n_iter);
    }

    std::optional<ConvergenceMonitor> monitor;
    if (config.n_chains >= 2) {
        monitor.emplace(config.n_chains, free.size(), config.monitor);
    }
    Eigen::VectorXd values(static_cast<Eigen::Index>(free.size()));

    for (std::size_t h = 0; h < config.n_iter; ++h) {
        for (std::size_t c = 0; c < config.n_chains; ++c) {
            auto& s = states[c];
            parameter_step(s, data, prior, streams[c], config.mnar);
            impute_step(s, data, config.weight_initial ? initial : std::nullopt, streams[c],
                        config.mnar);
            s.iteration = h + 1;

            Draw draw;
            draw.psi = s.psi.entries();
            draw.eta = s.eta;
            draw.kernel = KernelId::Gibbs;
            result.chains[c].draws.push_back(std::move(draw));

            if (monitor) {
                for (std::size_t e = 0; e < free.size(); ++e) {
                    values[static_cast<Eigen::Index>(e)] = s.psi(free[e].row, free[e].col);
                }
                monitor->push(c, values);
            }
        }
        if (monitor && monitor->maybe_check() && monitor->burn_in() && config.stop_at_rt) break;
    }

    if (monitor) {
        result.diagnostics = monitor->trace();
        result.burn_in = monitor->burn_in();
    }
    return result;
}

}  // namespace mkest
