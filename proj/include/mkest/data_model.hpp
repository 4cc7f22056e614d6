#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>

#include "mkest/markov_model.hpp"

namespace mkest {

/// Marker for an unobserved cell in a SequencePanel.
inline constexpr int kMissing = -1;

using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

/// m individuals observed at times 0..T. States are 0-based in memory and
/// 1-based in files; kMissing marks unobserved cells, so the missingness
/// indicator is exactly `table == kMissing`.
class SequencePanel {
public:
    SequencePanel(int states, int horizon);
    SequencePanel(int states, Eigen::MatrixXi table);

    Eigen::Index individuals() const noexcept { return table_.rows(); }
    int horizon() const noexcept { return horizon_; }
    int states() const noexcept { return states_; }

    int at(Eigen::Index k, int t) const { return table_(k, t); }
    bool missing(Eigen::Index k, int t) const { return table_(k, t) == kMissing; }
    void set(Eigen::Index k, int t, int state);
    void hide(Eigen::Index k, int t) { table_(k, t) = kMissing; }

    const Eigen::MatrixXi& table() const noexcept { return table_; }
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> missing_mask() const {
        return (table_.array() == kMissing).matrix();
    }
    bool complete() const { return (table_.array() != kMissing).all(); }
    Eigen::Index observed_in_row(Eigen::Index k) const {
        return (table_.row(k).array() != kMissing).count();
    }
    Eigen::Index observed_cells() const { return (table_.array() != kMissing).count(); }
    /// True when every individual has exactly one observed cell.
    bool single_observation() const;

    /// Individuals of `other` appended below this panel's.
    SequencePanel concatenated(const SequencePanel& other) const;

    friend bool operator==(const SequencePanel& a, const SequencePanel& b) {
        return a.states_ == b.states_ && a.horizon_ == b.horizon_ && a.table_ == b.table_;
    }

private:
    int states_;
    int horizon_;
    Eigen::MatrixXi table_;
};

/// Per-time state occupancy counts n_j(t), t = 0..T.
class AggregateCounts {
public:
    explicit AggregateCounts(CountMatrix counts);

    int horizon() const noexcept { return static_cast<int>(counts_.rows()) - 1; }
    int states() const noexcept { return static_cast<int>(counts_.cols()); }
    long long at(int t, int j) const { return counts_(t, j); }
    const CountMatrix& table() const noexcept { return counts_; }
    /// Individuals counted at time t.
    long long population(int t) const { return counts_.row(t).sum(); }
    long long total() const { return counts_.sum(); }

    friend bool operator==(const AggregateCounts& a, const AggregateCounts& b) {
        return a.counts_ == b.counts_;
    }

private:
    CountMatrix counts_;
};

/// One-step transition counts w_ij.
struct TransitionCounts {
    CountMatrix w;

    /// Throws InconsistentDataError if a forbidden transition was counted.
    void check_support(const SupportMask& support) const;
    TransitionCounts operator+(const TransitionCounts& other) const { return {w + other.w}; }
};

/// Counts adjacent pairs (t-1, t) over individuals; the panel must be complete.
TransitionCounts count_transitions(const SequencePanel& panel);

/// Number of individuals observed in each state at each time.
AggregateCounts aggregate(const SequencePanel& panel);

/// CSV, one individual per row, columns t = 0..T, "NA" for missing cells,
/// states labelled 1..r. With `states` unset, r is the largest label seen.
SequencePanel load_panel(const std::filesystem::path& path, std::optional<int> states = {});
void save_panel(const std::filesystem::path& path, const SequencePanel& panel,
                const std::string& comment = {});

/// CSV with header "t,s1,...,sr" and one row per time.
AggregateCounts load_counts(const std::filesystem::path& path);
void save_counts(const std::filesystem::path& path, const AggregateCounts& counts,
                 const std::string& comment = {});

}  // namespace mkest
