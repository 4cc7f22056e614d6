#include "mkest/prob_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "mkest/errors.hpp"

namespace mkest {

namespace {

using namespace boost::math::policies;
using QuietPolicy = policy<promote_double<false>, overflow_error<ignore_error>,
                           underflow_error<ignore_error>, evaluation_error<ignore_error>,
                           denorm_error<ignore_error>>;
using Beta = boost::math::beta_distribution<double, QuietPolicy>;
using Normal = boost::math::normal_distribution<double, QuietPolicy>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Smallest tail mass used when mapping to normal scores; |Phi^{-1}(1e-300)| ~ 37.
constexpr double kTailFloor = 1e-300;

}  // namespace

DirichletParams::DirichletParams(Eigen::VectorXd alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 2) {
        throw ParameterError("Dirichlet needs at least two components, got " +
                             std::to_string(alpha_.size()));
    }
    for (Eigen::Index j = 0; j < alpha_.size(); ++j) {
        if (!(alpha_[j] > 0.0) || !std::isfinite(alpha_[j])) {
            throw ParameterError("Dirichlet component " + std::to_string(j) +
                                 " is not a positive finite number");
        }
    }
}

Eigen::VectorXd sample_dirichlet(const DirichletParams& params, RandomStream& rng) {
    const Eigen::Index k = params.size();
    Eigen::VectorXd logs(k);
    for (Eigen::Index j = 0; j < k; ++j) logs[j] = rng.log_gamma(params.alpha()[j]);
    const double top = logs.maxCoeff();
    Eigen::VectorXd x = (logs.array() - top).exp().matrix();
    x /= x.sum();
    return x;
}

double log_dirichlet_density(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const DirichletParams& params) {
    const auto& alpha = params.alpha();
    if (x.size() != alpha.size()) {
        throw ParameterError("Dirichlet density: point has " + std::to_string(x.size()) +
                             " components, parameters have " + std::to_string(alpha.size()));
    }
    double out = std::lgamma(alpha.sum());
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        out -= std::lgamma(alpha[j]);
        if (x[j] <= 0.0) {
            if (alpha[j] != 1.0) return kNegInf;
            continue;
        }
        out += (alpha[j] - 1.0) * std::log(x[j]);
    }
    return out;
}

std::size_t sample_categorical(std::span<const double> weights, RandomStream& rng) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) {
            throw DegenerateDistributionError("categorical weight is negative or not finite");
        }
        total += w;
    }
    if (!(total > 0.0)) throw DegenerateDistributionError("all categorical weights are zero");

    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] <= 0.0) continue;
        last_positive = j;
        cumulative += weights[j];
        if (target < cumulative) return j;
    }
    return last_positive;
}

Eigen::VectorXd empirical_cdf_scores(const Eigen::Ref<const Eigen::VectorXd>& samples) {
    const Eigen::Index p = samples.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return samples[a] < samples[b]; });

    Eigen::VectorXd scores(p);
    const double denom = static_cast<double>(p) + 1.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && samples[order[j + 1]] == samples[order[i]]) ++j;
        // ranks i+1 .. j+1 share their average
        const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) scores[order[k]] = rank / denom;
        i = j + 1;
    }
    return scores;
}

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) {
        throw ParameterError("correlation matrix is not square");
    }
    for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
        if (entries_(i, i) != 1.0) throw ParameterError("correlation diagonal must be exactly 1");
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::abs(entries_(i, j) - entries_(j, i)) > 1e-12) {
                throw ParameterError("correlation matrix is not symmetric");
            }
            if (!std::isfinite(entries_(i, j))) {
                throw ParameterError("correlation entry is not finite");
            }
        }
    }
}

CorrelationMatrix CorrelationMatrix::identity(Eigen::Index n) {
    return CorrelationMatrix(Eigen::MatrixXd::Identity(n, n));
}

CorrelationMatrix pearson_correlation(const Eigen::Ref<const Eigen::MatrixXd>& columns) {
    const Eigen::Index p = columns.rows();
    const Eigen::Index r = columns.cols();
    Eigen::MatrixXd centered(p, r);
    std::vector<bool> constant(static_cast<std::size_t>(r));
    for (Eigen::Index c = 0; c < r; ++c) {
        constant[c] = p == 0 || columns.col(c).maxCoeff() == columns.col(c).minCoeff();
        centered.col(c) = columns.col(c).array() - columns.col(c).mean();
    }
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            double rho = 0.0;
            if (!constant[i] && !constant[j]) {
                rho = centered.col(i).dot(centered.col(j)) /
                      std::sqrt(centered.col(i).squaredNorm() * centered.col(j).squaredNorm());
                rho = std::clamp(rho, -1.0, 1.0);
            }
            R(i, j) = R(j, i) = rho;
        }
    }
    return CorrelationMatrix(std::move(R));
}

std::optional<Eigen::MatrixXd> cholesky(const Eigen::Ref<const Eigen::MatrixXd>& R) {
    const Eigen::Index n = R.rows();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = R(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
        if (!(pivot > 1e-12 * std::max(1.0, std::abs(R(j, j))))) return std::nullopt;
        L(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = R(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }
    return L;
}

double condition_number(const Eigen::Ref<const Eigen::MatrixXd>& R) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(R, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd magnitudes = solver.eigenvalues().cwiseAbs();
    const double largest = magnitudes.maxCoeff();
    const double smallest = magnitudes.minCoeff();
    if (smallest <= largest * 1e-15) return std::numeric_limits<double>::infinity();
    return largest / smallest;
}

std::optional<RegularizedCorrelation> regularize_correlation(const CorrelationMatrix& R) {
    const Eigen::Index n = R.size();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    for (double eps : {0.0, 1e-6, 1e-3, 1e-1}) {
        Eigen::MatrixXd shrunk = (1.0 - eps) * R.matrix() + eps * eye;
        shrunk.diagonal().setOnes();
        auto lower = cholesky(shrunk);
        if (!lower || condition_number(shrunk) > kMaxConditionNumber) continue;
        return RegularizedCorrelation{CorrelationMatrix(std::move(shrunk)), std::move(*lower), eps};
    }
    return std::nullopt;
}

CopulaSpec::CopulaSpec(CorrelationMatrix correlation, std::vector<BetaMarginal> marginals)
    : correlation_(std::move(correlation)), marginals_(std::move(marginals)) {
    auto lower = cholesky(correlation_.matrix());
    if (!lower) throw DecompositionError("copula correlation is not positive definite");
    lower_ = std::move(*lower);
    log_det_ = 2.0 * lower_.diagonal().array().log().sum();
    check_marginals();
}

CopulaSpec::CopulaSpec(CorrelationMatrix correlation, Eigen::MatrixXd lower,
                       std::vector<BetaMarginal> marginals)
    : correlation_(std::move(correlation)),
      lower_(std::move(lower)),
      marginals_(std::move(marginals)),
      log_det_(2.0 * lower_.diagonal().array().log().sum()) {
    check_marginals();
}

void CopulaSpec::check_marginals() const {
    if (static_cast<Eigen::Index>(marginals_.size()) != correlation_.size()) {
        throw ParameterError("copula has " + std::to_string(marginals_.size()) +
                             " marginals for a correlation of size " +
                             std::to_string(correlation_.size()));
    }
    for (const auto& m : marginals_) {
        if (!(m.a > 0.0) || !(m.b > 0.0) || !std::isfinite(m.a) || !std::isfinite(m.b)) {
            throw ParameterError("Beta marginal parameters must be positive and finite");
        }
    }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double u) { return boost::math::quantile(Normal(0.0, 1.0), u); }

double beta_cdf(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return boost::math::cdf(Beta(a, b), x);
}

double beta_log_pdf(double x, double a, double b) {
    if (!(x > 0.0) || !(x < 1.0)) return kNegInf;
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - std::lgamma(a) -
           std::lgamma(b) + std::lgamma(a + b);
}

double beta_normal_score(double x, double a, double b) {
    const double floor_score = normal_quantile(kTailFloor);
    if (x <= 0.0) return floor_score;
    if (x >= 1.0) return -floor_score;
    const Beta dist(a, b);
    const double lower = boost::math::cdf(dist, x);
    if (lower <= 0.5) return normal_quantile(std::max(lower, kTailFloor));
    const double upper = boost::math::cdf(boost::math::complement(dist, x));
    return -normal_quantile(std::max(upper, kTailFloor));
}

Eigen::VectorXd sample_gaussian_copula(const CopulaSpec& spec, RandomStream& rng) {
    const Eigen::Index n = spec.dimension();
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = rng.normal();
    const Eigen::VectorXd z = spec.lower().triangularView<Eigen::Lower>() * g;

    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Beta dist(spec.marginals()[i].a, spec.marginals()[i].b);
        if (z[i] <= 0.0) {
            x[i] = boost::math::quantile(dist, std::max(normal_cdf(z[i]), kTailFloor));
        } else {
            const double tail = std::max(normal_cdf(-z[i]), kTailFloor);
            x[i] = boost::math::quantile(boost::math::complement(dist, tail));
        }
    }
    return x;
}

double gaussian_copula_log_density(const CopulaSpec& spec,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::Index n = spec.dimension();
    if (x.size() != n) throw ParameterError("copula density: dimension mismatch");
    Eigen::VectorXd q(n);
    double marginal = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto [a, b] = spec.marginals()[i];
        const double lp = beta_log_pdf(x[i], a, b);
        if (lp == kNegInf) return kNegInf;
        marginal += lp;
        q[i] = beta_normal_score(x[i], a, b);
    }
    // log c(u) = -1/2 q^T (R^{-1} - I) q - 1/2 log det R
    const Eigen::VectorXd y = spec.lower().triangularView<Eigen::Lower>().solve(q);
    return marginal - 0.5 * (y.squaredNorm() - q.squaredNorm()) - 0.5 * spec.log_det();
}

}  // namespace mkest
