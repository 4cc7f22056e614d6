#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "mkest/data_model.hpp"
#include "mkest/markov_model.hpp"
#include "mkest/posterior.hpp"
#include "mkest/prob_kernel.hpp"
#include "mkest/random.hpp"

namespace mkest {

/// Row-wise Dirichlet hyperparameters gamma_ij for psi, plus Beta(alpha_i,
/// beta_i) hyperparameters for state-dependent missingness probabilities.
struct PriorSpec {
    Eigen::MatrixXd gamma;
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;

    /// gamma = 1 everywhere, alpha = beta = 1.
    static PriorSpec uniform(Eigen::Index states);

    Eigen::Index states() const noexcept { return gamma.rows(); }
    /// Throws ParameterError unless gamma is positive on the support.
    void check(const SupportMask& support) const;
};

/// Independent Dirichlet posterior for each free row; fixed rows carry none.
struct RowwisePosterior {
    SupportMask support;
    std::vector<std::optional<DirichletParams>> rows;

    Eigen::MatrixXd mean() const;
    /// The posterior read back as a prior for further updating.
    PriorSpec as_prior() const;
};

/// Dirichlet(gamma_i + w_i) over each row's supported entries.
RowwisePosterior conjugate_posterior(const PriorSpec& prior, const TransitionCounts& counts,
                                     const SupportMask& support);

/// One matrix with free rows drawn from their Dirichlet laws.
Eigen::MatrixXd draw_matrix(const RowwisePosterior& posterior, RandomStream& rng);

PosteriorSample sample_posterior(const RowwisePosterior& posterior, std::size_t n_draws,
                                 RandomStream& rng);

}  // namespace mkest
