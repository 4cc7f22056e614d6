#include "mkest/diagnostics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "csv.hpp"
#include "mkest/errors.hpp"

namespace mkest {

double psrf_from_moments(std::span<const double> means, std::span<const double> variances,
                         double n) {
    const auto c = static_cast<double>(means.size());
    double w = 0.0;
    for (double v : variances) w += v;
    w /= c;
    // pairwise form: exactly zero when all chain means agree
    double b_over_n = 0.0;
    for (std::size_t k = 0; k < means.size(); ++k) {
        for (std::size_t l = k + 1; l < means.size(); ++l) {
            b_over_n += (means[k] - means[l]) * (means[k] - means[l]);
        }
    }
    b_over_n /= c * (c - 1.0);

    if (w <= 0.0) return b_over_n <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double v_hat = (n - 1.0) / n * w + (1.0 + 1.0 / c) * b_over_n;
    return std::sqrt(v_hat / w);
}

double psrf(std::span<const Eigen::VectorXd> chains) {
    if (chains.size() < 2) throw ParameterError("psrf needs at least two chains");
    const Eigen::Index total = chains[0].size();
    for (const auto& chain : chains) {
        if (chain.size() != total) throw ParameterError("psrf chains differ in length");
    }
    const Eigen::Index start = total / 2;
    const Eigen::Index n = total - start;
    if (n < 4) throw ParameterError("psrf needs at least 4 draws in the second half");

    // common shift, as in the online monitor; constant chains give exact zeros
    const double shift = chains[0][start];
    std::vector<double> means, variances;
    for (const auto& chain : chains) {
        const Eigen::ArrayXd half = chain.tail(n).array() - shift;
        const double mean = half.mean();
        means.push_back(mean);
        variances.push_back((half - mean).square().sum() / static_cast<double>(n - 1));
    }
    return psrf_from_moments(means, variances, static_cast<double>(n));
}

DiagnosticTrace diagnose(std::span<const Eigen::MatrixXd> traces, const BurnInConfig& config) {
    if (traces.size() < 2) throw ParameterError("convergence checks need at least two chains");
    ConvergenceMonitor monitor(traces.size(), static_cast<std::size_t>(traces[0].cols()), config);
    const Eigen::Index n = traces[0].rows();
    for (const auto& t : traces) {
        if (t.rows() != n || t.cols() != traces[0].cols()) {
            throw ParameterError("traces differ in shape");
        }
    }
    for (Eigen::Index h = 0; h < n; ++h) {
        for (std::size_t c = 0; c < traces.size(); ++c) monitor.push(c, traces[c].row(h).transpose());
        monitor.maybe_check();
    }
    return monitor.trace();
}

std::optional<std::size_t> detect_burn_in(std::span<const Eigen::MatrixXd> traces,
                                          const BurnInConfig& config) {
    return diagnose(traces, config).burn_in;
}

ConvergenceMonitor::ConvergenceMonitor(std::size_t chains, std::size_t elements,
                                       BurnInConfig config)
    : config_(config), elements_(elements), sums_(chains), shift_(Eigen::VectorXd::Zero(elements)) {
    if (chains < 2) throw ParameterError("convergence monitoring needs at least two chains");
    if (config_.check_interval < 8) throw ParameterError("check interval must be at least 8");
    if (config_.patience < 1) throw ParameterError("patience must be at least 1");
    const auto k = static_cast<Eigen::Index>(elements);
    for (auto& s : sums_) {
        s.s1 = Eigen::VectorXd::Zero(k);
        s.s2 = Eigen::VectorXd::Zero(k);
        s.snap1.push_back(s.s1);  // j = 0, index 0
        s.snap2.push_back(s.s2);
    }
}

void ConvergenceMonitor::push(std::size_t chain, const Eigen::Ref<const Eigen::VectorXd>& values) {
    if (!shift_set_) {
        shift_ = values;  // common shift; the statistic is location invariant
        shift_set_ = true;
    }
    auto& s = sums_.at(chain);
    const Eigen::VectorXd x = values - shift_;
    s.s1 += x;
    s.s2 += x.cwiseProduct(x);
    ++s.count;
    const std::size_t j = s.snap1.size();
    if (s.count == j * config_.check_interval / 2) {
        s.snap1.push_back(s.s1);
        s.snap2.push_back(s.s2);
    }
}

bool ConvergenceMonitor::maybe_check() {
    const std::size_t h = sums_[0].count;
    for (const auto& s : sums_) {
        if (s.count != h) return false;
    }
    if (h == 0 || h % config_.check_interval != 0 || h == length_) return false;
    length_ = h;

    const std::size_t J = h / config_.check_interval;
    const double n = static_cast<double>(h - h / 2);
    const auto k = static_cast<Eigen::Index>(elements_);
    CheckPoint point{h, Eigen::VectorXd(k), 0.0, false};
    std::vector<double> means(sums_.size()), variances(sums_.size());
    for (Eigen::Index e = 0; e < k; ++e) {
        for (std::size_t c = 0; c < sums_.size(); ++c) {
            const auto& s = sums_[c];
            const double a1 = s.snap1[2 * J][e] - s.snap1[J][e];
            const double a2 = s.snap2[2 * J][e] - s.snap2[J][e];
            means[c] = a1 / n;
            variances[c] = std::max(0.0, (a2 - a1 * a1 / n) / (n - 1.0));
        }
        point.element_psrf[e] = psrf_from_moments(means, variances, n);
    }
    point.max_psrf = k ? point.element_psrf.maxCoeff() : 1.0;
    point.rt_met = point.max_psrf < config_.threshold;

    run_ = point.rt_met ? run_ + 1 : 0;
    trace_.points.push_back(std::move(point));
    if (!trace_.burn_in && run_ >= config_.patience) {
        trace_.burn_in = trace_.points[trace_.points.size() - run_].iteration;
    }
    return true;
}

ErrorMetrics error_metrics(const TransitionMatrix& estimate, const TransitionMatrix& truth) {
    if (estimate.states() != truth.states()) {
        throw ParameterError("error metrics need matrices of the same size");
    }
    const Eigen::Index r = truth.states();
    ErrorMetrics out{Eigen::MatrixXd::Zero(r, r), 0.0};
    double diff2 = 0.0;
    double norm2 = 0.0;
    for (const auto& e : truth.supported_entries()) {
        const double t = truth(e.row, e.col);
        const double d = std::abs(estimate(e.row, e.col) - t);
        out.per_entry(e.row, e.col) = t > 0.0 ? d / t : d;
        diff2 += d * d;
        norm2 += t * t;
    }
    out.relative_euclidean = std::sqrt(diff2 / norm2);
    return out;
}

void write_diagnostics(const std::filesystem::path& path, const DiagnosticTrace& trace,
                       const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "check_iter,max_psrf,rt_met\n";
    for (const auto& p : trace.points) {
        out << p.iteration << ',' << csv::format_double(p.max_psrf) << ',' << (p.rt_met ? 1 : 0)
            << '\n';
    }
}

}  // namespace mkest
