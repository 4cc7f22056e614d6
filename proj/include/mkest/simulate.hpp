#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "mkest/data_model.hpp"
#include "mkest/markov_model.hpp"
#include "mkest/random.hpp"

namespace mkest {

/// Complete trajectories: state at t=0 from p0, then one row draw per step.
SequencePanel simulate_panel(const TransitionMatrix& matrix, const StateDistribution& p0,
                             Eigen::Index individuals, int horizon, RandomStream& rng);

/// Keeps every cell with t >= 1 independently with probability keep_prob;
/// the t=0 column is never hidden.
SequencePanel mask_random(const SequencePanel& panel, double keep_prob, RandomStream& rng);
/// Same with a per-time keep probability (index t; entry 0 is ignored).
SequencePanel mask_random(const SequencePanel& panel, std::span<const double> keep_by_time,
                          RandomStream& rng);

/// Keeps exactly one cell per individual, at a time uniform on
/// {first..last} (default {1..T}); everything else, t=0 included, is hidden.
SequencePanel mask_single_observation(const SequencePanel& panel, RandomStream& rng,
                                      int first = 1, int last = -1);

/// State-dependent missingness: a cell with t >= 1 in state i is hidden with
/// probability eta_i.
SequencePanel mask_state_dependent(const SequencePanel& panel, const Eigen::VectorXd& eta,
                                   RandomStream& rng);

struct RraSamplingStats {
    long long row_draws = 0;
    long long matrix_draws = 0;
};

/// Checks the ordering constraints of the reliability family: decreasing row
/// entries from the diagonal with each entry above its tail sum, and a
/// nondecreasing diagonal. The matrix must be upper triangular.
bool satisfies_rra_constraints(const TransitionMatrix& matrix);

/// Upper-triangular r_max x r_max matrix with absorbing last row, drawn by
/// uniform-Dirichlet rows and rejection on the ordering constraints. Rows are
/// also rejected when a collapse down to 3 states would break the ordering.
TransitionMatrix sample_rra_matrix(int r_max, RandomStream& rng,
                                   RraSamplingStats* stats = nullptr);

/// Merges the last two states: column r-1 absorbs column r and the result's
/// last row is absorbing.
TransitionMatrix collapse_matrix(const TransitionMatrix& matrix);

/// The matrix followed by its successive collapses down to `smallest` states.
std::vector<TransitionMatrix> collapse_family(const TransitionMatrix& matrix, int smallest = 3);

namespace presets {

/// Four-state tridiagonal benchmark matrix and its initial law (3/4, 1/4, 0, 0).
TransitionMatrix lee_matrix();
StateDistribution lee_initial();

/// Stand-in for the turbine crack study: 4 upper-triangular states, all
/// units new at t=0. Synthetic; it does not reproduce any published table.
TransitionMatrix turbine_matrix();
StateDistribution turbine_initial();

}  // namespace presets

}  // namespace mkest
