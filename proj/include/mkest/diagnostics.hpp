#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mkest/markov_model.hpp"

namespace mkest {

/// Quasi-stationarity threshold on the potential scale reduction factor.
inline constexpr double kRuleOfThumb = 1.1;

/// Corrected potential scale reduction factor over the second half of each
/// chain: sqrt(((n-1)/n W + (1 + 1/c) B/n) / W). Returns 1 when every chain
/// is constant at the same value and +inf when W = 0 < B.
double psrf(std::span<const Eigen::VectorXd> chains);

/// Same statistic on explicit per-chain sample moments (n samples each).
double psrf_from_moments(std::span<const double> means, std::span<const double> variances,
                         double n);

struct BurnInConfig {
    std::size_t check_interval = 100;
    std::size_t patience = 5;
    double threshold = kRuleOfThumb;
};

struct CheckPoint {
    std::size_t iteration;         // draws per chain seen at this check
    Eigen::VectorXd element_psrf;  // one value per monitored entry
    double max_psrf;
    bool rt_met;                   // max_psrf < threshold
};

struct DiagnosticTrace {
    std::vector<CheckPoint> points;
    /// First check point of the first run of `patience` consecutive
    /// checks below the threshold.
    std::optional<std::size_t> burn_in;
};

/// Runs the check schedule over recorded traces (one n x K matrix per chain,
/// K monitored elements; all chains of equal length).
DiagnosticTrace diagnose(std::span<const Eigen::MatrixXd> traces, const BurnInConfig& config);

std::optional<std::size_t> detect_burn_in(std::span<const Eigen::MatrixXd> traces,
                                          const BurnInConfig& config);

/// Online version of diagnose(): chains push one row at a time in lockstep;
/// each check costs O(chains x elements) via prefix-sum snapshots.
class ConvergenceMonitor {
public:
    ConvergenceMonitor(std::size_t chains, std::size_t elements, BurnInConfig config);

    void push(std::size_t chain, const Eigen::Ref<const Eigen::VectorXd>& values);
    /// Evaluates a check point if every chain has just reached one.
    /// Returns true when a new check point was recorded.
    bool maybe_check();

    std::size_t length() const noexcept { return length_; }
    const DiagnosticTrace& trace() const noexcept { return trace_; }
    std::optional<std::size_t> burn_in() const noexcept { return trace_.burn_in; }
    const BurnInConfig& config() const noexcept { return config_; }

private:
    struct ChainSums {
        Eigen::VectorXd s1, s2;              // running sums of shifted values
        std::vector<Eigen::VectorXd> snap1;  // at floor(j * interval / 2)
        std::vector<Eigen::VectorXd> snap2;
        std::size_t count = 0;
    };

    BurnInConfig config_;
    std::size_t elements_;
    std::vector<ChainSums> sums_;
    Eigen::VectorXd shift_;
    bool shift_set_ = false;
    std::size_t length_ = 0;
    std::size_t run_ = 0;
    DiagnosticTrace trace_;
};

struct ErrorMetrics {
    Eigen::MatrixXd per_entry;  // relative error, absolute where the truth is 0
    double relative_euclidean;  // ||est - true||_2 / ||true||_2 on the support
};

ErrorMetrics error_metrics(const TransitionMatrix& estimate, const TransitionMatrix& truth);

/// CSV: check_iter, max_psrf, rt_met.
void write_diagnostics(const std::filesystem::path& path, const DiagnosticTrace& trace,
                       const std::string& comment = {});

}  // namespace mkest
