#include "mkest/mh.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mkest/errors.hpp"
#include "mkest/prob_kernel.hpp"

namespace mkest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_coarse(KernelId k) { return k == KernelId::DcsCoarse || k == KernelId::RcsCoarse; }
bool is_randomized(KernelId k) { return k == KernelId::Rcs || k == KernelId::RcsCoarse; }
bool is_adaptive(KernelId k) {
    return k == KernelId::Dcs || k == KernelId::Rcs || is_coarse(k);
}

// Supported entries of row i of m, in column order.
Eigen::VectorXd row_values(const Eigen::MatrixXd& m, const SupportMask& s, Eigen::Index i,
                           Eigen::Index skip = -1) {
    Eigen::VectorXd v(s.row(i).count() - (skip >= 0 ? 1 : 0));
    Eigen::Index slot = 0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        if (s(i, j) && j != skip) v[slot++] = m(i, j);
    }
    return v;
}

bool positive_on_support(const Eigen::MatrixXd& m, const SupportMask& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
            if (s(i, j) && !(m(i, j) > 0.0)) return false;
        }
    }
    return true;
}

double basic_log_density(const TransitionMatrix& from, const Eigen::MatrixXd& to,
                         const Eigen::VectorXd& d) {
    const auto& s = from.support();
    double total = 0.0;
    for (Eigen::Index i : from.free_rows()) {
        const DirichletParams params(d[i] * row_values(from.entries(), s, i));
        total += log_dirichlet_density(row_values(to, s, i), params);
    }
    return total;
}

std::vector<Eigen::Index> choose_pivots(const TransitionMatrix& current, KernelId kernel,
                                        RandomStream& rng) {
    std::vector<Eigen::Index> pivots(static_cast<std::size_t>(current.states()), -1);
    for (Eigen::Index i : current.free_rows()) {
        const auto cols = current.supported_columns(i);
        Eigen::Index pick;
        if (is_randomized(kernel)) {
            pick = cols[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cols.size()) - 1))];
        } else {
            pick = current.support()(i, i) ? i : cols.front();
        }
        pivots[static_cast<std::size_t>(i)] = pick;
    }
    return pivots;
}

// Euclidean projection of the supported entries of row i onto the simplex.
void project_row(Eigen::MatrixXd& m, const SupportMask& s, Eigen::Index i) {
    std::vector<double> v;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        if (s(i, j)) v.push_back(m(i, j));
    }
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cum += sorted[k];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (sorted[k] > t) theta = t;
    }
    for (Eigen::Index j = 0; j < s.cols(); ++j) m(i, j) = s(i, j) ? std::max(0.0, m(i, j) - theta) : 0.0;
}

}  // namespace

Eigen::MatrixXd aggregate_least_squares(const AggregateCounts& counts, const SupportMask& support,
                                        int iterations) {
    const Eigen::Index r = support.rows();
    if (counts.states() != r) throw ParameterError("counts and support disagree on the number of states");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(r, r);  // sum p(t)' p(t)
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(r, r);  // sum p(t)' p(t+1)
    for (int t = 0; t < counts.horizon(); ++t) {
        if (counts.population(t) == 0 || counts.population(t + 1) == 0) continue;
        const Eigen::RowVectorXd p = counts.table().row(t).cast<double>() / static_cast<double>(counts.population(t));
        const Eigen::RowVectorXd q =
            counts.table().row(t + 1).cast<double>() / static_cast<double>(counts.population(t + 1));
        a += p.transpose() * p;
        b += p.transpose() * q;
    }
    Eigen::MatrixXd psi(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto k = static_cast<double>(support.row(i).count());
        for (Eigen::Index j = 0; j < r; ++j) psi(i, j) = support(i, j) ? 1.0 / k : 0.0;
    }
    const double lipschitz = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().maxCoeff();
    if (!(lipschitz > 0.0)) return psi;
    const double step = 1.0 / lipschitz;
    for (int it = 0; it < iterations; ++it) {
        psi -= step * (a * psi - b);
        for (Eigen::Index i = 0; i < r; ++i) project_row(psi, support, i);
    }
    return psi;
}

void MhConfig::check() const {
    if (!is_adaptive(kernel) && kernel != KernelId::Basic) {
        throw ConfigError(std::string("kernel ") + kernel_name(kernel) + " is not an MH kernel");
    }
    if (!(d_lo > 0.0) || !(d_hi >= d_lo) || !std::isfinite(d_hi)) {
        throw ConfigError("d range must satisfy 0 < d_lo <= d_hi");
    }
    if (p_window < 3) throw ConfigError("p_window must be at least 3");
    if (adapt_start <= p_window) throw ConfigError("adapt_start must exceed p_window");
    if (n_iter < 1) throw ConfigError("n_iter must be positive");
    if (n_chains < 1) throw ConfigError("n_chains must be positive");
    if (monitor.check_interval < 8) throw ConfigError("check_interval must be at least 8");
    if (monitor.patience < 1) throw ConfigError("patience must be at least 1");
    if (!(monitor.threshold > 1.0)) throw ConfigError("psrf threshold must exceed 1");
    if (init_tries < 1) throw ConfigError("init_tries must be positive");
    if (init_candidates < 1) throw ConfigError("init_candidates must be positive");
    if (!(init_spread > 0.0 && init_spread <= 1.0)) throw ConfigError("init_spread must lie in (0, 1]");
}

HistoryWindow::HistoryWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 1) throw ParameterError("window capacity must be positive");
}

bool HistoryWindow::push(const Eigen::MatrixXd& matrix) {
    for (const auto& m : matrices_) {
        if ((m - matrix).cwiseAbs().maxCoeff() <= kDistinctTolerance) return false;
    }
    matrices_.push_back(matrix);
    if (matrices_.size() > capacity_) matrices_.pop_front();
    return true;
}

double log_likelihood_counts(const Eigen::MatrixXd& psi, const AggregateCounts& counts,
                             const Eigen::VectorXd& p0) {
    if (p0.size() != psi.rows() || counts.states() != psi.rows()) {
        throw ParameterError("likelihood: matrix, counts and p0 sizes differ");
    }
    Eigen::RowVectorXd p = p0.transpose();
    double total = 0.0;
    for (int t = 0; t <= counts.horizon(); ++t) {
        if (t > 0) p = p * psi;
        for (int j = 0; j < counts.states(); ++j) {
            const long long n = counts.at(t, j);
            if (n == 0) continue;
            if (!(p[j] > 0.0)) return kNegInf;
            total += static_cast<double>(n) * std::log(p[j]);
        }
    }
    return total;
}

double log_prior(const TransitionMatrix& psi, const PriorSpec& prior) {
    double total = 0.0;
    for (Eigen::Index i : psi.free_rows()) {
        const DirichletParams params(row_values(prior.gamma, psi.support(), i));
        total += log_dirichlet_density(row_values(psi.entries(), psi.support(), i), params);
    }
    return total;
}

Proposal basic_proposal(const TransitionMatrix& current, const Eigen::VectorXd& d,
                        RandomStream& rng) {
    const auto& s = current.support();
    Eigen::MatrixXd cand = current.entries();
    for (Eigen::Index i : current.free_rows()) {
        const DirichletParams params(d[i] * row_values(current.entries(), s, i));
        const Eigen::VectorXd row = sample_dirichlet(params, rng);
        Eigen::Index slot = 0;
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
            if (s(i, j)) cand(i, j) = row[slot++];
        }
    }
    Proposal out{cand, 0.0, 0.0, KernelId::Basic, false, {}};
    if (!positive_on_support(cand, s)) {
        out.underflow = true;
        return out;
    }
    out.log_forward = basic_log_density(current, cand, d);
    out.log_reverse = basic_log_density(TransitionMatrix(cand, s), current.entries(), d);
    return out;
}

double adaptive_log_density(const TransitionMatrix& from, const Eigen::MatrixXd& to,
                            const std::vector<Eigen::Index>& pivots,
                            const CorrelationMatrix& correlation, const Eigen::MatrixXd& lower,
                            const Eigen::VectorXd& d) {
    const auto& s = from.support();
    const auto rows = from.free_rows();
    std::vector<BetaMarginal> marginals;
    Eigen::VectorXd x(static_cast<Eigen::Index>(rows.size()));
    double rest = 0.0;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        const Eigen::Index i = rows[n];
        const Eigen::Index piv = pivots[static_cast<std::size_t>(i)];
        const double a = from(i, piv);
        marginals.push_back({d[i] * a, d[i] * (1.0 - a)});
        x[static_cast<Eigen::Index>(n)] = to(i, piv);

        const Eigen::Index k = s.row(i).count();
        if (k <= 2) continue;
        const double scale_from = 1.0 - a;
        const double scale_to = 1.0 - to(i, piv);
        if (!(scale_to > 0.0)) return kNegInf;
        const DirichletParams params(d[i] / scale_from * row_values(from.entries(), s, i, piv));
        rest += log_dirichlet_density(row_values(to, s, i, piv) / scale_to, params);
        rest -= static_cast<double>(k - 2) * std::log(scale_to);
    }
    const CopulaSpec spec(correlation, lower, std::move(marginals));
    return gaussian_copula_log_density(spec, x) + rest;
}

Proposal adaptive_proposal(const TransitionMatrix& current, const HistoryWindow& window,
                           KernelId kernel, const Eigen::VectorXd& d, RandomStream& rng) {
    if (!is_adaptive(kernel)) throw ParameterError("adaptive proposal needs an adaptive kernel");
    auto fallback = [&] {
        Proposal p = basic_proposal(current, d, rng);
        p.fallback = true;
        return p;
    };
    if (!window.full()) return fallback();

    const auto& s = current.support();
    const auto rows = current.free_rows();
    const auto pivots = choose_pivots(current, kernel, rng);
    const auto dim = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(window.size());

    Eigen::MatrixXd scores(p, dim);
    for (Eigen::Index h = 0; h < p; ++h) {
        const auto& m = window.matrices()[static_cast<std::size_t>(h)];
        for (Eigen::Index n = 0; n < dim; ++n) {
            const Eigen::Index i = rows[static_cast<std::size_t>(n)];
            scores(h, n) = m(i, pivots[static_cast<std::size_t>(i)]);
        }
    }
    if (!is_coarse(kernel)) {
        for (Eigen::Index n = 0; n < dim; ++n) scores.col(n) = empirical_cdf_scores(scores.col(n));
    }
    const auto reg = regularize_correlation(pearson_correlation(scores));
    if (!reg) return fallback();

    std::vector<BetaMarginal> marginals;
    for (Eigen::Index i : rows) {
        const double a = current(i, pivots[static_cast<std::size_t>(i)]);
        marginals.push_back({d[i] * a, d[i] * (1.0 - a)});
    }
    const CopulaSpec spec(reg->correlation, reg->lower, marginals);

    Eigen::MatrixXd cand = current.entries();
    const Eigen::VectorXd x = sample_gaussian_copula(spec, rng);
    bool ok = true;
    for (Eigen::Index n = 0; n < dim && ok; ++n) {
        const Eigen::Index i = rows[static_cast<std::size_t>(n)];
        const Eigen::Index piv = pivots[static_cast<std::size_t>(i)];
        const double xi = x[n];
        ok = xi > 0.0 && xi < 1.0;
        if (!ok) break;
        cand(i, piv) = xi;
        const Eigen::Index k = s.row(i).count();
        const double remaining = 1.0 - xi;
        if (k == 2) {
            for (Eigen::Index j = 0; j < s.cols(); ++j) {
                if (s(i, j) && j != piv) cand(i, j) = remaining;
            }
            continue;
        }
        const DirichletParams params(d[i] / (1.0 - current(i, piv)) *
                                     row_values(current.entries(), s, i, piv));
        const Eigen::VectorXd z = sample_dirichlet(params, rng);
        Eigen::Index slot = 0;
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
            if (s(i, j) && j != piv) cand(i, j) = z[slot++] * remaining;
        }
    }
    if (!ok || !positive_on_support(cand, s)) {
        Proposal out{current.entries(), 0.0, 0.0, kernel, false, pivots};
        out.underflow = true;
        return out;
    }

    Proposal out{cand, 0.0, 0.0, kernel, false, pivots};
    out.log_forward = adaptive_log_density(current, cand, pivots, reg->correlation, reg->lower, d);
    out.log_reverse = adaptive_log_density(TransitionMatrix(cand, s), current.entries(), pivots,
                                           reg->correlation, reg->lower, d);
    return out;
}

bool mh_accept(double logpost_current, double logpost_candidate, double log_forward,
               double log_reverse, RandomStream& rng) {
    if (logpost_current == kNegInf || std::isnan(logpost_current)) {
        throw InvalidStateError("current state has zero posterior density");
    }
    if (logpost_candidate == kNegInf) return false;
    const double log_ratio = logpost_candidate - logpost_current + log_reverse - log_forward;
    if (std::isnan(log_ratio)) return false;
    if (log_ratio >= 0.0) return true;
    return std::log(rng.uniform()) < log_ratio;
}

MhResult run_mh(const AggregateCounts& counts, const SupportMask& support, const PriorSpec& prior,
                const Eigen::VectorXd& p0, const MhConfig& config, std::uint64_t seed) {
    config.check();
    const Eigen::Index r = support.rows();
    if (counts.states() != r || p0.size() != r) {
        throw ParameterError("counts, p0 and support disagree on the number of states");
    }
    prior.check(support);
    StateDistribution check_p0(p0);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (support.row(i).count() == 0) {
            throw StructureError("row " + std::to_string(i + 1) + " has no allowed entry");
        }
    }

    struct Chain {
        RandomStream rng;
        TransitionMatrix psi;
        double logpost;
        HistoryWindow window;
    };

    const RowwisePosterior prior_law = conjugate_posterior(
        prior, TransitionCounts{CountMatrix::Zero(r, r)}, support);
    auto log_posterior = [&](const TransitionMatrix& m) {
        const double ll = log_likelihood_counts(m.entries(), counts, p0);
        return ll == kNegInf ? kNegInf : ll + log_prior(m, prior);
    };

    std::optional<Eigen::MatrixXd> anchor;
    if (config.init_spread < 1.0) anchor = aggregate_least_squares(counts, support);

    MhResult result;
    std::vector<Chain> chains;
    for (std::size_t c = 0; c < config.n_chains; ++c) {
        RandomStream rng(seed, c);
        std::optional<TransitionMatrix> start;
        double lp = kNegInf;
        std::size_t found = 0;
        for (std::size_t attempt = 0; attempt < config.init_tries && found < config.init_candidates;
             ++attempt) {
            Eigen::MatrixXd entries = draw_matrix(prior_law, rng);
            if (anchor) entries = (1.0 - config.init_spread) * *anchor + config.init_spread * entries;
            TransitionMatrix draw(std::move(entries), support);
            if (!positive_on_support(draw.entries(), support)) continue;
            const double value = log_posterior(draw);
            if (value == kNegInf) continue;
            ++found;
            if (value > lp) {
                lp = value;
                start.emplace(std::move(draw));
            }
        }
        if (lp == kNegInf) {
            throw InconsistentDataError("no prior draw gives the counts positive likelihood");
        }
        Chain chain{rng, *start, lp, HistoryWindow(config.p_window)};
        chain.window.push(chain.psi.entries());
        chains.push_back(std::move(chain));
        result.chains.push_back(PosteriorSample{static_cast<int>(c), support, {}});
        result.chains.back().draws.reserve(config.n_iter);
        result.stats.emplace_back();
    }

    const auto free = chains[0].psi.free_entries();
    std::optional<ConvergenceMonitor> monitor;
    if (config.n_chains >= 2) monitor.emplace(config.n_chains, free.size(), config.monitor);
    Eigen::VectorXd values(static_cast<Eigen::Index>(free.size()));
    Eigen::VectorXd d(r);

    const bool adaptive = is_adaptive(config.kernel);
    std::optional<std::size_t> tau;
    if (adaptive && config.n_adapt <= config.adapt_start) tau = config.n_adapt;

    for (std::size_t h = 0; h < config.n_iter; ++h) {
        if (adaptive && !tau && h >= config.n_adapt) tau = config.n_adapt;
        const bool use_adaptive = adaptive && !tau && h >= config.adapt_start;

        for (std::size_t c = 0; c < config.n_chains; ++c) {
            auto& chain = chains[c];
            auto& st = result.stats[c];
            for (Eigen::Index i = 0; i < r; ++i) {
                d[i] = config.d_lo + (config.d_hi - config.d_lo) * chain.rng.uniform();
            }
            Proposal prop = use_adaptive
                                ? adaptive_proposal(chain.psi, chain.window, config.kernel, d, chain.rng)
                                : basic_proposal(chain.psi, d, chain.rng);
            if (prop.fallback) ++st.fallbacks;
            if (prop.kernel == KernelId::Basic) {
                ++st.basic_proposals;
            } else {
                ++st.adaptive_proposals;
                if (tau) ++st.adaptive_after_freeze;
            }

            bool accept = false;
            if (prop.underflow) {
                ++st.underflows;
            } else {
                TransitionMatrix cand(prop.candidate, support);
                const double lp = log_posterior(cand);
                accept = mh_accept(chain.logpost, lp, prop.log_forward, prop.log_reverse, chain.rng);
                if (accept) {
                    chain.psi = std::move(cand);
                    chain.logpost = lp;
                    chain.window.push(chain.psi.entries());
                    ++st.accepted;
                }
            }
            ++st.iterations;

            Draw draw;
            draw.psi = chain.psi.entries();
            draw.accepted = accept;
            draw.kernel = prop.kernel;
            draw.d = d;
            draw.fallback = prop.fallback;
            result.chains[c].draws.push_back(std::move(draw));

            if (monitor) {
                for (std::size_t e = 0; e < free.size(); ++e) {
                    values[static_cast<Eigen::Index>(e)] = chain.psi(free[e].row, free[e].col);
                }
                monitor->push(c, values);
            }
        }

        if (monitor && monitor->maybe_check() && monitor->burn_in()) {
            if (adaptive && !tau && config.freeze_on_rt) tau = h + 1;
            if (config.stop_at_rt) break;
        }
    }

    if (monitor) {
        result.diagnostics = monitor->trace();
        result.burn_in = monitor->burn_in();
    }
    result.tau = tau;
    return result;
}

}  // namespace mkest
