#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "mkest/random.hpp"

namespace mkest {

/// Dirichlet concentration vector: length >= 2, every component > 0.
class DirichletParams {
public:
    explicit DirichletParams(Eigen::VectorXd alpha);

    const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
    Eigen::Index size() const noexcept { return alpha_.size(); }
    double total() const noexcept { return alpha_.sum(); }
    Eigen::VectorXd mean() const { return alpha_ / alpha_.sum(); }

private:
    Eigen::VectorXd alpha_;
};

/// Normalized Gamma draws; shapes below 1 are drawn on the log scale so that
/// tiny concentrations do not collapse to exact zeros.
Eigen::VectorXd sample_dirichlet(const DirichletParams& params, RandomStream& rng);

/// log Gamma(sum a) - sum log Gamma(a_j) + sum (a_j - 1) log x_j.
/// Returns -infinity when x has a zero component whose a_j != 1.
double log_dirichlet_density(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const DirichletParams& params);

/// Index j (0-based) drawn with probability w_j / sum(w).
std::size_t sample_categorical(std::span<const double> weights, RandomStream& rng);

/// Rank scores rank/(p+1), ties receiving their average rank.
Eigen::VectorXd empirical_cdf_scores(const Eigen::Ref<const Eigen::VectorXd>& samples);

/// Symmetric matrix with exact unit diagonal.
class CorrelationMatrix {
public:
    explicit CorrelationMatrix(Eigen::MatrixXd entries);
    static CorrelationMatrix identity(Eigen::Index n);

    const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
    Eigen::Index size() const noexcept { return entries_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

private:
    Eigen::MatrixXd entries_;
};

/// Sample Pearson correlation between the columns of a p x r matrix.
/// Constant columns get zero off-diagonal correlation.
CorrelationMatrix pearson_correlation(const Eigen::Ref<const Eigen::MatrixXd>& columns);

/// Lower-triangular L with L L^T = R, or nullopt when a pivot is not
/// positive at tolerance 1e-12.
std::optional<Eigen::MatrixXd> cholesky(const Eigen::Ref<const Eigen::MatrixXd>& R);

/// max |eigenvalue| / min |eigenvalue|; +infinity for singular matrices.
double condition_number(const Eigen::Ref<const Eigen::MatrixXd>& R);

struct RegularizedCorrelation {
    CorrelationMatrix correlation;
    Eigen::MatrixXd lower;  // Cholesky factor
    double shrinkage;       // epsilon applied, 0 if none
};

inline constexpr double kMaxConditionNumber = 1e8;

/// Returns R itself when it factors and is well conditioned, otherwise
/// (1 - eps) R + eps I for eps in {1e-6, 1e-3, 1e-1}; nullopt if all fail.
std::optional<RegularizedCorrelation> regularize_correlation(const CorrelationMatrix& R);

struct BetaMarginal {
    double a;
    double b;
};

/// Gaussian copula with Beta marginals. The correlation must factor;
/// construction throws DecompositionError otherwise.
class CopulaSpec {
public:
    CopulaSpec(CorrelationMatrix correlation, std::vector<BetaMarginal> marginals);
    /// Uses an already computed Cholesky factor of `correlation`.
    CopulaSpec(CorrelationMatrix correlation, Eigen::MatrixXd lower,
               std::vector<BetaMarginal> marginals);

    const CorrelationMatrix& correlation() const noexcept { return correlation_; }
    const Eigen::MatrixXd& lower() const noexcept { return lower_; }
    const std::vector<BetaMarginal>& marginals() const noexcept { return marginals_; }
    Eigen::Index dimension() const noexcept { return correlation_.size(); }
    double log_det() const noexcept { return log_det_; }

private:
    void check_marginals() const;

    CorrelationMatrix correlation_;
    Eigen::MatrixXd lower_;
    std::vector<BetaMarginal> marginals_;
    double log_det_;
};

Eigen::VectorXd sample_gaussian_copula(const CopulaSpec& spec, RandomStream& rng);

/// Log density of x under the copula including the Beta marginal densities.
double gaussian_copula_log_density(const CopulaSpec& spec,
                                   const Eigen::Ref<const Eigen::VectorXd>& x);

double beta_log_pdf(double x, double a, double b);
double beta_cdf(double x, double a, double b);
/// Phi^{-1}(F_beta(x)), computed from the nearer tail; clamped to |z| <= ~37.
double beta_normal_score(double x, double a, double b);
double normal_cdf(double z);
double normal_quantile(double u);

}  // namespace mkest
