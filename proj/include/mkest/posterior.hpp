#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mkest/markov_model.hpp"

namespace mkest {

enum class KernelId { Conjugate, Gibbs, Basic, Dcs, Rcs, DcsCoarse, RcsCoarse };

const char* kernel_name(KernelId id);
KernelId parse_kernel(const std::string& name);

/// One retained iteration of a sampler.
struct Draw {
    Eigen::MatrixXd psi;
    Eigen::VectorXd eta;  // empty unless missingness probabilities are sampled
    bool accepted = true;
    KernelId kernel = KernelId::Conjugate;
    Eigen::VectorXd d;  // proposal concentrations (MH only)
    bool fallback = false;
};

/// Iterations of one chain, in order.
struct PosteriorSample {
    int chain = 0;
    SupportMask support;
    std::vector<Draw> draws;

    std::size_t size() const noexcept { return draws.size(); }
};

/// Values of the given entries across iterations: an n x K matrix.
Eigen::MatrixXd entry_trace(const PosteriorSample& sample, std::span<const MatrixEntry> entries,
                            std::size_t first = 0);

struct EntrySummary {
    MatrixEntry entry;
    double mean;
    double sd;
    double lower;  // 0.025 quantile
    double upper;  // 0.975 quantile
};

/// Linear-interpolation quantile of already sorted values.
double sorted_quantile(std::span<const double> sorted, double prob);

/// Pooled summaries of every supported entry over draws at index >= burn_in.
std::vector<EntrySummary> summarize(std::span<const PosteriorSample> chains, std::size_t burn_in);
/// Same for the missingness probabilities (index i in `entry.row`).
std::vector<EntrySummary> summarize_eta(std::span<const PosteriorSample> chains,
                                        std::size_t burn_in);

Eigen::MatrixXd posterior_mean(std::span<const PosteriorSample> chains, std::size_t burn_in);

/// CSV: iter, chain, supported psi entries rowwise (psi_i_j, 1-based), eta_i,
/// and for MH draws accepted, kernel, d_i, fallback.
void write_posterior(const std::filesystem::path& path, std::span<const PosteriorSample> chains,
                     const std::string& comment = {});
std::vector<PosteriorSample> read_posterior(const std::filesystem::path& path);

}  // namespace mkest
