#include "mkest/exact.hpp"

#include <string>

#include "mkest/errors.hpp"

namespace mkest {

PriorSpec PriorSpec::uniform(Eigen::Index states) {
    return {Eigen::MatrixXd::Ones(states, states), Eigen::VectorXd::Ones(states),
            Eigen::VectorXd::Ones(states)};
}

void PriorSpec::check(const SupportMask& support) const {
    if (gamma.rows() != support.rows() || gamma.cols() != support.cols()) {
        throw ParameterError("prior gamma has the wrong shape");
    }
    for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
        for (Eigen::Index j = 0; j < gamma.cols(); ++j) {
            if (support(i, j) && !(gamma(i, j) > 0.0)) {
                throw ParameterError("prior gamma(" + std::to_string(i + 1) + "," +
                                     std::to_string(j + 1) + ") must be positive");
            }
        }
    }
    if (alpha.size() && ((alpha.array() <= 0.0).any() || alpha.size() != gamma.rows())) {
        throw ParameterError("prior alpha must be positive, one per state");
    }
    if (beta.size() && ((beta.array() <= 0.0).any() || beta.size() != gamma.rows())) {
        throw ParameterError("prior beta must be positive, one per state");
    }
}

Eigen::MatrixXd RowwisePosterior::mean() const {
    const Eigen::Index r = support.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        Eigen::Index slot = 0;
        const Eigen::VectorXd m = rows[i] ? rows[i]->mean() : Eigen::VectorXd::Ones(1);
        for (Eigen::Index j = 0; j < r; ++j) {
            if (support(i, j)) out(i, j) = m[slot++];
        }
    }
    return out;
}

PriorSpec RowwisePosterior::as_prior() const {
    PriorSpec prior = PriorSpec::uniform(support.rows());
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
        if (!rows[i]) continue;
        Eigen::Index slot = 0;
        for (Eigen::Index j = 0; j < support.cols(); ++j) {
            if (support(i, j)) prior.gamma(i, j) = rows[i]->alpha()[slot++];
        }
    }
    return prior;
}

RowwisePosterior conjugate_posterior(const PriorSpec& prior, const TransitionCounts& counts,
                                     const SupportMask& support) {
    prior.check(support);
    counts.check_support(support);
    RowwisePosterior post{support, {}};
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
        const auto k = support.row(i).count();
        if (k == 0) throw StructureError("row " + std::to_string(i + 1) + " has no allowed entry");
        if (k == 1) {
            post.rows.emplace_back(std::nullopt);
            continue;
        }
        Eigen::VectorXd alpha(k);
        Eigen::Index slot = 0;
        for (Eigen::Index j = 0; j < support.cols(); ++j) {
            if (support(i, j)) alpha[slot++] = prior.gamma(i, j) + static_cast<double>(counts.w(i, j));
        }
        post.rows.emplace_back(DirichletParams(std::move(alpha)));
    }
    return post;
}

Eigen::MatrixXd draw_matrix(const RowwisePosterior& posterior, RandomStream& rng) {
    const auto& support = posterior.support;
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(support.rows(), support.cols());
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
        if (!posterior.rows[i]) {
            for (Eigen::Index j = 0; j < support.cols(); ++j) {
                if (support(i, j)) psi(i, j) = 1.0;
            }
            continue;
        }
        const Eigen::VectorXd row = sample_dirichlet(*posterior.rows[i], rng);
        Eigen::Index slot = 0;
        for (Eigen::Index j = 0; j < support.cols(); ++j) {
            if (support(i, j)) psi(i, j) = row[slot++];
        }
    }
    return psi;
}

PosteriorSample sample_posterior(const RowwisePosterior& posterior, std::size_t n_draws,
                                 RandomStream& rng) {
    PosteriorSample sample{0, posterior.support, {}};
    sample.draws.reserve(n_draws);
    for (std::size_t h = 0; h < n_draws; ++h) {
        Draw draw;
        draw.psi = draw_matrix(posterior, rng);
        draw.kernel = KernelId::Conjugate;
        sample.draws.push_back(std::move(draw));
    }
    return sample;
}

}  // namespace mkest
