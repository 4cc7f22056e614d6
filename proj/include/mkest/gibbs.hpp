#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mkest/data_model.hpp"
#include "mkest/diagnostics.hpp"
#include "mkest/exact.hpp"
#include "mkest/markov_model.hpp"
#include "mkest/posterior.hpp"
#include "mkest/random.hpp"

namespace mkest {

struct GibbsConfig {
    std::size_t n_iter = 5000;
    std::size_t n_chains = 3;
    /// Selection-model missingness: sample eta and weight imputations by it.
    bool mnar = false;
    /// Weight t=0 imputations by the known initial law; otherwise uniform.
    bool weight_initial = true;
    BurnInConfig monitor{};
    /// End the run at the check point that confirms burn-in.
    bool stop_at_rt = false;

    void check() const;
};

/// Current parameters and completed panel of one chain.
struct GibbsState {
    TransitionMatrix psi;
    Eigen::VectorXd eta;  // empty unless MNAR
    SequencePanel imputed;
    std::size_t iteration = 0;
};

/// Redraws every missing cell of `panel` in `state.imputed`, one at a time in
/// time order. `initial` weights the t=0 cells when given.
void impute_step(GibbsState& state, const SequencePanel& panel,
                 const std::optional<Eigen::VectorXd>& initial, RandomStream& rng, bool mnar);

/// psi_i ~ Dir(gamma_i + w_i) from the completed panel; under MNAR also
/// eta_i ~ Be(alpha_i + a_i, beta_i + b_i), a_i and b_i counting the missing
/// and observed cells (t >= 1) currently in state i.
void parameter_step(GibbsState& state, const SequencePanel& panel, const PriorSpec& prior,
                    RandomStream& rng, bool mnar);

/// Completes `panel` by forward sampling from `matrix`, each stretch before an
/// observed cell conditioned to reach it. Throws ImputationError when an
/// individual's observations cannot be joined under the support.
SequencePanel initial_imputation(const SequencePanel& panel, const TransitionMatrix& matrix,
                                 const std::optional<Eigen::VectorXd>& initial,
                                 RandomStream& rng);

struct GibbsResult {
    std::vector<PosteriorSample> chains;
    DiagnosticTrace diagnostics;
    std::optional<std::size_t> burn_in;
    std::vector<std::string> warnings;
    Eigen::Index dropped = 0;
};

/// Runs `config.n_chains` chains from stream (seed, c) for n_iter iterations.
/// Individuals without any observation are dropped with a warning.
GibbsResult run_gibbs(const SequencePanel& panel, const SupportMask& support,
                      const PriorSpec& prior, const GibbsConfig& config, std::uint64_t seed,
                      const std::optional<Eigen::VectorXd>& initial = {});

}  // namespace mkest
