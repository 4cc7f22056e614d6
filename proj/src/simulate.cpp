#include "mkest/simulate.hpp"

#include <algorithm>
#include <functional>
#include <string>

#include "mkest/errors.hpp"
#include "mkest/prob_kernel.hpp"

namespace mkest {

namespace {

int draw_state(const Eigen::RowVectorXd& probs, RandomStream& rng) {
    return static_cast<int>(
        sample_categorical(std::span<const double>(probs.data(), probs.size()), rng));
}

}  // namespace

SequencePanel simulate_panel(const TransitionMatrix& matrix, const StateDistribution& p0,
                             Eigen::Index individuals, int horizon, RandomStream& rng) {
    if (auto v = validate(matrix)) throw ParameterError("invalid matrix: " + v->message);
    if (p0.states() != matrix.states()) throw ParameterError("p0 and matrix sizes differ");
    if (individuals < 0 || horizon < 0) throw ParameterError("m and T must be nonnegative");

    const Eigen::RowVectorXd initial = p0.probs().transpose();
    std::vector<Eigen::RowVectorXd> rows;
    for (Eigen::Index i = 0; i < matrix.states(); ++i) rows.emplace_back(matrix.entries().row(i));

    Eigen::MatrixXi table(individuals, horizon + 1);
    for (Eigen::Index k = 0; k < individuals; ++k) {
        int s = draw_state(initial, rng);
        table(k, 0) = s;
        for (int t = 1; t <= horizon; ++t) {
            s = draw_state(rows[s], rng);
            table(k, t) = s;
        }
    }
    return SequencePanel(static_cast<int>(matrix.states()), std::move(table));
}

SequencePanel mask_random(const SequencePanel& panel, double keep_prob, RandomStream& rng) {
    std::vector<double> schedule(static_cast<std::size_t>(panel.horizon()) + 1, keep_prob);
    return mask_random(panel, schedule, rng);
}

SequencePanel mask_random(const SequencePanel& panel, std::span<const double> keep_by_time,
                          RandomStream& rng) {
    if (keep_by_time.size() != static_cast<std::size_t>(panel.horizon()) + 1) {
        throw ParameterError("keep schedule needs one entry per time 0..T");
    }
    for (std::size_t t = 1; t < keep_by_time.size(); ++t) {
        if (!(keep_by_time[t] > 0.0) || keep_by_time[t] > 1.0) {
            throw ParameterError("keep probability must lie in (0, 1]");
        }
    }
    SequencePanel out = panel;
    for (Eigen::Index k = 0; k < out.individuals(); ++k) {
        for (int t = 1; t <= out.horizon(); ++t) {
            if (!rng.bernoulli(keep_by_time[t])) out.hide(k, t);
        }
    }
    return out;
}

SequencePanel mask_single_observation(const SequencePanel& panel, RandomStream& rng, int first,
                                      int last) {
    if (last < 0) last = panel.horizon();
    if (panel.horizon() < 1) throw ParameterError("single-observation masking needs T >= 1");
    if (first < 0 || first > last || last > panel.horizon()) {
        throw ParameterError("observation window [" + std::to_string(first) + "," +
                             std::to_string(last) + "] outside 0..T");
    }
    SequencePanel out = panel;
    for (Eigen::Index k = 0; k < out.individuals(); ++k) {
        const auto keep = static_cast<int>(rng.uniform_int(first, last));
        for (int t = 0; t <= out.horizon(); ++t) {
            if (t != keep) out.hide(k, t);
        }
    }
    return out;
}

SequencePanel mask_state_dependent(const SequencePanel& panel, const Eigen::VectorXd& eta,
                                   RandomStream& rng) {
    if (eta.size() != panel.states()) throw ParameterError("eta needs one entry per state");
    if ((eta.array() < 0.0).any() || (eta.array() >= 1.0).any()) {
        throw ParameterError("missingness probabilities must lie in [0, 1)");
    }
    SequencePanel out = panel;
    for (Eigen::Index k = 0; k < out.individuals(); ++k) {
        for (int t = 1; t <= out.horizon(); ++t) {
            if (!out.missing(k, t) && rng.bernoulli(eta[out.at(k, t)])) out.hide(k, t);
        }
    }
    return out;
}

namespace {

// v holds the row from the diagonal onwards: v[0] = psi_ii, v[1] = psi_i,i+1, ...
bool row_ordered(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const Eigen::Index n = v.size();
    if (n < 2) return true;
    if (!(v[0] > v[1])) return false;
    for (Eigen::Index k = 1; k + 1 < n; ++k) {
        if (!(v[0] > v[k])) return false;
        if (!(v[k] > v.tail(n - k - 1).sum())) return false;
    }
    return true;
}

}  // namespace

bool satisfies_rra_constraints(const TransitionMatrix& matrix) {
    const Eigen::Index r = matrix.states();
    if (!matrix.is_upper_triangular() || validate(matrix)) return false;
    if (matrix(r - 1, r - 1) != 1.0) return false;
    for (Eigen::Index i = 0; i + 1 < r; ++i) {
        const Eigen::VectorXd tail = matrix.entries().row(i).tail(r - i).transpose();
        if (!row_ordered(tail)) return false;
        if (matrix(i, i) > matrix(i + 1, i + 1)) return false;
    }
    return true;
}

TransitionMatrix sample_rra_matrix(int r_max, RandomStream& rng, RraSamplingStats* stats) {
    if (r_max < 3) throw ParameterError("reliability matrices need r_max >= 3");
    const Eigen::Index r = r_max;
    SupportMask support = SupportMask::Constant(r, r, false);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = i; j < r; ++j) support(i, j) = true;
    }
    support.row(r - 1).setConstant(false);
    support(r - 1, r - 1) = true;

    RraSamplingStats local;
    while (true) {
        ++local.matrix_draws;
        Eigen::MatrixXd entries = Eigen::MatrixXd::Zero(r, r);
        entries(r - 1, r - 1) = 1.0;
        for (Eigen::Index i = 0; i + 1 < r; ++i) {
            const DirichletParams uniform(Eigen::VectorXd::Ones(r - i));
            Eigen::VectorXd row;
            // rows 2..r-2 become the last free row in some collapse down to 3 states,
            // where the diagonal must beat the merged tail
            const bool collapses = i >= 1 && i + 2 < r;
            do {
                ++local.row_draws;
                // sorting a uniform draw is uniform on the decreasing region
                row = sample_dirichlet(uniform, rng);
                std::sort(row.begin(), row.end(), std::greater<>());
            } while (!row_ordered(row) || (collapses && !(row[0] > row.tail(row.size() - 1).sum())));
            entries.row(i).tail(r - i) = row.transpose();
        }
        bool monotone = true;
        for (Eigen::Index i = 0; i + 2 < r; ++i) monotone &= entries(i, i) <= entries(i + 1, i + 1);
        if (monotone) {
            if (stats) *stats = local;
            return TransitionMatrix(std::move(entries), support);
        }
    }
}

TransitionMatrix collapse_matrix(const TransitionMatrix& matrix) {
    const Eigen::Index r = matrix.states();
    if (r < 3) throw StructureError("collapse needs at least 3 states");
    if (!matrix.is_upper_triangular()) throw StructureError("collapse needs an upper-triangular matrix");
    if (matrix(r - 1, r - 1) != 1.0) throw StructureError("collapse needs an absorbing last state");

    const Eigen::Index n = r - 1;
    Eigen::MatrixXd entries = matrix.entries().topLeftCorner(n, n);
    SupportMask support = matrix.support().topLeftCorner(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        entries(i, n - 1) += matrix(i, r - 1);
        support(i, n - 1) = support(i, n - 1) || matrix.support()(i, r - 1);
    }
    entries.row(n - 1).setZero();
    entries(n - 1, n - 1) = 1.0;
    support.row(n - 1).setConstant(false);
    support(n - 1, n - 1) = true;
    return TransitionMatrix(std::move(entries), std::move(support));
}

std::vector<TransitionMatrix> collapse_family(const TransitionMatrix& matrix, int smallest) {
    std::vector<TransitionMatrix> family{matrix};
    while (family.back().states() > smallest) family.push_back(collapse_matrix(family.back()));
    return family;
}

namespace presets {

TransitionMatrix lee_matrix() {
    Eigen::MatrixXd m(4, 4);
    m << 0.6, 0.4, 0.0, 0.0,
         0.1, 0.5, 0.4, 0.0,
         0.0, 0.1, 0.7, 0.2,
         0.0, 0.0, 0.1, 0.9;
    return TransitionMatrix(m);
}

StateDistribution lee_initial() { return StateDistribution(Eigen::Vector4d(0.75, 0.25, 0.0, 0.0)); }

TransitionMatrix turbine_matrix() {
    Eigen::MatrixXd m(4, 4);
    m << 0.64, 0.30, 0.045, 0.015,
         0.0, 0.71, 0.25, 0.04,
         0.0, 0.0, 0.87, 0.13,
         0.0, 0.0, 0.0, 1.0;
    SupportMask upper = SupportMask::Constant(4, 4, false);
    for (int i = 0; i < 4; ++i) {
        for (int j = i; j < 4; ++j) upper(i, j) = true;
    }
    upper.row(3).setConstant(false);
    upper(3, 3) = true;
    return TransitionMatrix(m, upper);
}

StateDistribution turbine_initial() { return StateDistribution(Eigen::Vector4d(1.0, 0.0, 0.0, 0.0)); }

}  // namespace presets

}  // namespace mkest
