#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "mkest/data_model.hpp"
#include "mkest/diagnostics.hpp"
#include "mkest/exact.hpp"
#include "mkest/markov_model.hpp"
#include "mkest/posterior.hpp"
#include "mkest/random.hpp"

namespace mkest {

struct MhConfig {
    KernelId kernel = KernelId::Basic;
    double d_lo = 100.0;
    double d_hi = 2500.0;
    std::size_t p_window = 30;
    /// First iteration allowed to use the adaptive kernel.
    std::size_t adapt_start = 200;
    /// Adaptation budget: the adaptive kernel is frozen from this iteration on
    /// (or earlier, once burn-in is confirmed and freeze_on_rt is set).
    std::size_t n_adapt = 5000;
    std::size_t n_iter = 20000;
    std::size_t n_chains = 3;
    BurnInConfig monitor{};
    bool freeze_on_rt = true;
    /// End the run at the check point that confirms burn-in.
    bool stop_at_rt = false;
    std::size_t init_tries = 1000;
    /// Each chain starts from the best of this many prior draws with finite
    /// log posterior.
    std::size_t init_candidates = 10;
    /// Starting point = (1 - init_spread) * least-squares fit + init_spread *
    /// prior draw. 1 starts from the prior draw alone.
    double init_spread = 0.1;

    void check() const;
};

/// The last p pairwise-distinct accepted matrices, oldest first.
class HistoryWindow {
public:
    /// Matrices closer than this in max-abs distance count as identical.
    static constexpr double kDistinctTolerance = 1e-12;

    explicit HistoryWindow(std::size_t capacity);

    /// Appends `matrix` unless it matches a retained one; returns whether it
    /// was added. The oldest matrix is dropped once capacity is exceeded.
    bool push(const Eigen::MatrixXd& matrix);
    bool full() const noexcept { return matrices_.size() == capacity_; }
    std::size_t size() const noexcept { return matrices_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    const std::deque<Eigen::MatrixXd>& matrices() const noexcept { return matrices_; }

private:
    std::size_t capacity_;
    std::deque<Eigen::MatrixXd> matrices_;
};

/// sum_t sum_j n_j(t) log p_j(t) with p(t) = p0 psi^t; -inf when a positive
/// count meets a zero probability.
double log_likelihood_counts(const Eigen::MatrixXd& psi, const AggregateCounts& counts,
                             const Eigen::VectorXd& p0);

/// Sum over free rows of the Dirichlet(gamma_i) log density.
double log_prior(const TransitionMatrix& psi, const PriorSpec& prior);

struct Proposal {
    Eigen::MatrixXd candidate;
    double log_forward;  // log J(candidate | current)
    double log_reverse;  // log J(current | candidate)
    KernelId kernel;
    bool fallback = false;
    std::vector<Eigen::Index> pivots;  // pivot column per row, -1 for fixed rows
    /// The draw underflowed to the boundary of the simplex; such a candidate
    /// is rejected without evaluation.
    bool underflow = false;
};

/// Each free row from Dir(d_i psi_i) on its support.
Proposal basic_proposal(const TransitionMatrix& current, const Eigen::VectorXd& d,
                        RandomStream& rng);

/// Correlated pivots from a Gaussian copula calibrated on `window`, then each
/// row's remainder from its conditional Dirichlet. Falls back to the basic
/// proposal (flagged) when the window is not full or the correlation cannot
/// be regularized.
Proposal adaptive_proposal(const TransitionMatrix& current, const HistoryWindow& window,
                           KernelId kernel, const Eigen::VectorXd& d, RandomStream& rng);

/// Log density of `to` under the adaptive proposal from `from`, for given
/// pivots and copula factor.
double adaptive_log_density(const TransitionMatrix& from, const Eigen::MatrixXd& to,
                            const std::vector<Eigen::Index>& pivots,
                            const CorrelationMatrix& correlation, const Eigen::MatrixXd& lower,
                            const Eigen::VectorXd& d);

/// Accept with probability min(1, exp(cand - cur + rev - fwd)). Throws
/// InvalidStateError when the current log posterior is -inf.
bool mh_accept(double logpost_current, double logpost_candidate, double log_forward,
               double log_reverse, RandomStream& rng);

struct MhChainStats {
    std::size_t iterations = 0;
    std::size_t accepted = 0;
    std::size_t basic_proposals = 0;
    std::size_t adaptive_proposals = 0;
    std::size_t fallbacks = 0;
    std::size_t adaptive_after_freeze = 0;
    std::size_t underflows = 0;

    double acceptance_rate() const {
        return iterations ? static_cast<double>(accepted) / static_cast<double>(iterations) : 0.0;
    }
};

struct MhResult {
    std::vector<PosteriorSample> chains;
    std::vector<MhChainStats> stats;
    DiagnosticTrace diagnostics;
    std::optional<std::size_t> burn_in;
    /// Iteration from which the adaptive kernel was frozen, if reached.
    std::optional<std::size_t> tau;
};

/// Minimizes sum_t |p(t) psi - p(t+1)|^2 over row-stochastic matrices on the
/// support, with p(t) the observed state frequencies at time t. Times with
/// no observations are skipped.
Eigen::MatrixXd aggregate_least_squares(const AggregateCounts& counts, const SupportMask& support,
                                        int iterations = 2000);

/// Runs `config.n_chains` chains from stream (seed, c), started from prior
/// draws with a finite posterior.
MhResult run_mh(const AggregateCounts& counts, const SupportMask& support, const PriorSpec& prior,
                const Eigen::VectorXd& p0, const MhConfig& config, std::uint64_t seed);

}  // namespace mkest
