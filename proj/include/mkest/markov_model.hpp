#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mkest {

using SupportMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct MatrixEntry {
    Eigen::Index row;
    Eigen::Index col;
    bool operator==(const MatrixEntry&) const = default;
};

/// Row-stochastic r x r matrix paired with the mask of structurally allowed
/// transitions. Construction only checks shapes; use validate() for the
/// stochastic constraints.
class TransitionMatrix {
public:
    TransitionMatrix(Eigen::MatrixXd entries, SupportMask support);
    /// Support inferred from exact zeros of `entries`.
    explicit TransitionMatrix(Eigen::MatrixXd entries);

    Eigen::Index states() const noexcept { return entries_.rows(); }
    const Eigen::MatrixXd& entries() const noexcept { return entries_; }
    const SupportMask& support() const noexcept { return support_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

    /// Number of allowed entries in row i.
    Eigen::Index row_support(Eigen::Index i) const;
    std::vector<Eigen::Index> supported_columns(Eigen::Index i) const;
    /// Rows with one allowed entry are fixed at 1 and carry no parameters.
    bool is_fixed_row(Eigen::Index i) const { return row_support(i) == 1; }
    std::vector<Eigen::Index> free_rows() const;
    /// Allowed entries, rowwise.
    std::vector<MatrixEntry> supported_entries() const;
    /// Allowed entries of the free rows, rowwise.
    std::vector<MatrixEntry> free_entries() const;
    bool is_upper_triangular() const;

    friend bool operator==(const TransitionMatrix& a, const TransitionMatrix& b) {
        return a.entries_ == b.entries_ && a.support_ == b.support_;
    }

private:
    Eigen::MatrixXd entries_;
    SupportMask support_;
};

/// Matrix with entries at the centre of each row's support, fixed rows at 1.
TransitionMatrix uniform_on_support(const SupportMask& support);

struct Violation {
    Eigen::Index row;
    Eigen::Index col;  // -1 for row-level problems
    std::string message;
};

/// First violated constraint (bounds, support, row sum), or nullopt when the
/// matrix is a valid transition matrix for its support.
std::optional<Violation> validate(const TransitionMatrix& matrix, double tolerance = 1e-10);

/// Probability vector over states at an integer time.
class StateDistribution {
public:
    explicit StateDistribution(Eigen::VectorXd probs, int time = 0);

    const Eigen::VectorXd& probs() const noexcept { return probs_; }
    int time() const noexcept { return time_; }
    Eigen::Index states() const noexcept { return probs_.size(); }

private:
    Eigen::VectorXd probs_;
    int time_;
};

/// p(0) psi^t by t successive vector-matrix products.
StateDistribution propagate(const StateDistribution& p0, const TransitionMatrix& matrix, int t);

/// State probabilities at every time 0..horizon; row t holds p(t).
Eigen::MatrixXd propagate_path(const Eigen::VectorXd& p0, const Eigen::MatrixXd& matrix,
                               int horizon);

/// Expected steps to absorption from every transient state, indexed in the
/// original state numbering (entry `absorbing` is 0).
Eigen::VectorXd absorption_times(const TransitionMatrix& matrix, Eigen::Index absorbing);

/// Mean time to absorption in `absorbing`, starting from `start`.
double mttf(const TransitionMatrix& matrix, Eigen::Index absorbing, Eigen::Index start);

/// CSV of r rows by r columns. The support is inferred from exact zeros
/// unless `mask_path` names a 0/1 CSV of the same shape.
TransitionMatrix load_matrix(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& mask_path = {});
void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& matrix,
                 const std::string& comment = {});
SupportMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const SupportMask& mask,
               const std::string& comment = {});

}  // namespace mkest
