#include "mkest/markov_model.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "csv.hpp"
#include "mkest/errors.hpp"

namespace mkest {

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd entries, SupportMask support)
    : entries_(std::move(entries)), support_(std::move(support)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
        throw ParameterError("transition matrix must be square and non-empty");
    }
    if (support_.rows() != entries_.rows() || support_.cols() != entries_.cols()) {
        throw ParameterError("support mask shape does not match the matrix");
    }
}

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd entries)
    : TransitionMatrix(entries, (entries.array() != 0.0).matrix()) {}

Eigen::Index TransitionMatrix::row_support(Eigen::Index i) const {
    return support_.row(i).count();
}

std::vector<Eigen::Index> TransitionMatrix::supported_columns(Eigen::Index i) const {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < states(); ++j) {
        if (support_(i, j)) cols.push_back(j);
    }
    return cols;
}

std::vector<Eigen::Index> TransitionMatrix::free_rows() const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < states(); ++i) {
        if (row_support(i) >= 2) rows.push_back(i);
    }
    return rows;
}

std::vector<MatrixEntry> TransitionMatrix::supported_entries() const {
    std::vector<MatrixEntry> out;
    for (Eigen::Index i = 0; i < states(); ++i) {
        for (Eigen::Index j = 0; j < states(); ++j) {
            if (support_(i, j)) out.push_back({i, j});
        }
    }
    return out;
}

std::vector<MatrixEntry> TransitionMatrix::free_entries() const {
    std::vector<MatrixEntry> out;
    for (Eigen::Index i : free_rows()) {
        for (Eigen::Index j : supported_columns(i)) out.push_back({i, j});
    }
    return out;
}

bool TransitionMatrix::is_upper_triangular() const {
    for (Eigen::Index i = 1; i < states(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            if (support_(i, j)) return false;
        }
    }
    return true;
}

TransitionMatrix uniform_on_support(const SupportMask& support) {
    Eigen::MatrixXd entries = Eigen::MatrixXd::Zero(support.rows(), support.cols());
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
        const auto k = support.row(i).count();
        if (k == 0) throw StructureError("row " + std::to_string(i + 1) + " has no allowed entry");
        for (Eigen::Index j = 0; j < support.cols(); ++j) {
            if (support(i, j)) entries(i, j) = 1.0 / static_cast<double>(k);
        }
    }
    return TransitionMatrix(std::move(entries), support);
}

std::optional<Violation> validate(const TransitionMatrix& matrix, double tolerance) {
    const auto& e = matrix.entries();
    for (Eigen::Index i = 0; i < matrix.states(); ++i) {
        if (matrix.row_support(i) == 0) {
            return Violation{i, -1, "row " + std::to_string(i + 1) + " has no allowed entry"};
        }
        for (Eigen::Index j = 0; j < matrix.states(); ++j) {
            const double x = e(i, j);
            if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
                return Violation{i, j, "entry (" + std::to_string(i + 1) + "," +
                                           std::to_string(j + 1) + ") is outside [0,1]"};
            }
            if (!matrix.support()(i, j) && x != 0.0) {
                return Violation{i, j, "entry (" + std::to_string(i + 1) + "," +
                                           std::to_string(j + 1) +
                                           ") is nonzero outside the support"};
            }
        }
        const double sum = e.row(i).sum();
        if (std::abs(sum - 1.0) > tolerance) {
            std::ostringstream msg;
            msg << "row " << i + 1 << " sums to " << sum;
            return Violation{i, -1, msg.str()};
        }
    }
    return std::nullopt;
}

StateDistribution::StateDistribution(Eigen::VectorXd probs, int time)
    : probs_(std::move(probs)), time_(time) {
    if (time_ < 0) throw ParameterError("state distribution time must be nonnegative");
    if (probs_.size() < 1) throw ParameterError("state distribution is empty");
    if ((probs_.array() < 0.0).any() || std::abs(probs_.sum() - 1.0) > 1e-10) {
        throw ParameterError("state distribution is not a probability vector");
    }
}

StateDistribution propagate(const StateDistribution& p0, const TransitionMatrix& matrix, int t) {
    if (t < 0) throw ParameterError("propagation horizon must be nonnegative");
    if (p0.states() != matrix.states()) {
        throw ParameterError("state distribution and matrix sizes differ");
    }
    Eigen::RowVectorXd p = p0.probs().transpose();
    for (int s = 0; s < t; ++s) p = p * matrix.entries();
    return StateDistribution(p.transpose(), p0.time() + t);
}

Eigen::MatrixXd propagate_path(const Eigen::VectorXd& p0, const Eigen::MatrixXd& matrix,
                               int horizon) {
    Eigen::MatrixXd path(horizon + 1, p0.size());
    path.row(0) = p0.transpose();
    for (int t = 1; t <= horizon; ++t) path.row(t) = path.row(t - 1) * matrix;
    return path;
}

Eigen::VectorXd absorption_times(const TransitionMatrix& matrix, Eigen::Index absorbing) {
    const Eigen::Index r = matrix.states();
    if (absorbing < 0 || absorbing >= r) throw ParameterError("absorbing state out of range");
    if (std::abs(matrix(absorbing, absorbing) - 1.0) > 1e-12) {
        throw NonAbsorbingError("state " + std::to_string(absorbing + 1) + " is not absorbing");
    }

    // every other state must reach the absorbing one through positive entries
    std::vector<bool> reaches(static_cast<std::size_t>(r), false);
    reaches[absorbing] = true;
    std::queue<Eigen::Index> frontier;
    frontier.push(absorbing);
    while (!frontier.empty()) {
        const auto j = frontier.front();
        frontier.pop();
        for (Eigen::Index i = 0; i < r; ++i) {
            if (!reaches[i] && matrix(i, j) > 0.0) {
                reaches[i] = true;
                frontier.push(i);
            }
        }
    }
    for (Eigen::Index i = 0; i < r; ++i) {
        if (!reaches[i]) {
            throw NonAbsorbingError("state " + std::to_string(i + 1) + " never reaches state " +
                                    std::to_string(absorbing + 1));
        }
    }

    std::vector<Eigen::Index> transient;
    for (Eigen::Index i = 0; i < r; ++i) {
        if (i != absorbing) transient.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(transient.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) system(a, b) -= matrix(transient[a], transient[b]);
    }
    Eigen::VectorXd times = Eigen::VectorXd::Zero(r);
    if (n == 0) return times;
    const Eigen::VectorXd steps = system.partialPivLu().solve(Eigen::VectorXd::Ones(n));
    for (Eigen::Index a = 0; a < n; ++a) times[transient[a]] = steps[a];
    return times;
}

double mttf(const TransitionMatrix& matrix, Eigen::Index absorbing, Eigen::Index start) {
    if (start < 0 || start >= matrix.states()) throw ParameterError("start state out of range");
    return absorption_times(matrix, absorbing)[start];
}

namespace {

Eigen::MatrixXd read_square(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path.string());
    const auto rows = csv::read_rows(in);
    const auto r = static_cast<Eigen::Index>(rows.size());
    if (r == 0) throw ParseError("matrix file is empty", 1);
    Eigen::MatrixXd m(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto& row = rows[i];
        if (static_cast<Eigen::Index>(row.fields.size()) != r) {
            throw ParseError("expected " + std::to_string(r) + " columns, got " +
                                 std::to_string(row.fields.size()),
                             row.line);
        }
        for (Eigen::Index j = 0; j < r; ++j) {
            const auto v = csv::parse_double(row.fields[j]);
            if (!v) throw ParseError("not a number: '" + row.fields[j] + "'", row.line);
            m(i, j) = *v;
        }
    }
    return m;
}

}  // namespace

TransitionMatrix load_matrix(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& mask_path) {
    Eigen::MatrixXd entries = read_square(path);
    if (!mask_path) return TransitionMatrix(std::move(entries));
    SupportMask mask = load_mask(*mask_path);
    if (mask.rows() != entries.rows()) throw DomainError("mask and matrix sizes differ");
    return TransitionMatrix(std::move(entries), std::move(mask));
}

SupportMask load_mask(const std::filesystem::path& path) {
    const Eigen::MatrixXd m = read_square(path);
    if (((m.array() != 0.0) && (m.array() != 1.0)).any()) {
        throw DomainError("mask entries must be 0 or 1");
    }
    return (m.array() != 0.0).matrix();
}

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& matrix,
                 const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    if (!comment.empty()) out << "# " << comment << '\n';
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            if (j) out << ',';
            out << csv::format_double(matrix(i, j));
        }
        out << '\n';
    }
}

void save_mask(const std::filesystem::path& path, const SupportMask& mask,
               const std::string& comment) {
    save_matrix(path, mask.cast<double>(), comment);
}

}  // namespace mkest
