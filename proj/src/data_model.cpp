#include "mkest/data_model.hpp"

#include <fstream>
#include <map>

#include "csv.hpp"
#include "mkest/errors.hpp"

namespace mkest {

SequencePanel::SequencePanel(int states, int horizon)
    : states_(states), horizon_(horizon), table_(0, horizon + 1) {
    if (states < 1) throw ParameterError("panel needs at least one state");
    if (horizon < 0) throw ParameterError("panel horizon must be nonnegative");
}

SequencePanel::SequencePanel(int states, Eigen::MatrixXi table)
    : states_(states), horizon_(static_cast<int>(table.cols()) - 1), table_(std::move(table)) {
    if (states < 1) throw ParameterError("panel needs at least one state");
    if (table_.cols() < 1) throw ParameterError("panel needs at least one time column");
    for (Eigen::Index k = 0; k < table_.rows(); ++k) {
        for (Eigen::Index t = 0; t < table_.cols(); ++t) {
            const int s = table_(k, t);
            if (s != kMissing && (s < 0 || s >= states_)) {
                throw DomainError("state label " + std::to_string(s + 1) + " outside 1.." +
                                  std::to_string(states_));
            }
        }
    }
}

void SequencePanel::set(Eigen::Index k, int t, int state) {
    if (state != kMissing && (state < 0 || state >= states_)) {
        throw DomainError("state label " + std::to_string(state + 1) + " outside 1.." +
                          std::to_string(states_));
    }
    table_(k, t) = state;
}

bool SequencePanel::single_observation() const {
    for (Eigen::Index k = 0; k < individuals(); ++k) {
        if (observed_in_row(k) != 1) return false;
    }
    return true;
}

SequencePanel SequencePanel::concatenated(const SequencePanel& other) const {
    if (other.horizon_ != horizon_ || other.states_ != states_) {
        throw ParameterError("panels have different shapes");
    }
    Eigen::MatrixXi joined(individuals() + other.individuals(), horizon_ + 1);
    joined << table_, other.table_;
    return SequencePanel(states_, std::move(joined));
}

AggregateCounts::AggregateCounts(CountMatrix counts) : counts_(std::move(counts)) {
    if (counts_.rows() < 1 || counts_.cols() < 1) {
        throw ParameterError("aggregate counts need at least one time and one state");
    }
    if ((counts_.array() < 0).any()) throw DomainError("aggregate counts must be nonnegative");
}

void TransitionCounts::check_support(const SupportMask& support) const {
    if (support.rows() != w.rows() || support.cols() != w.cols()) {
        throw InconsistentDataError("transition counts and support have different sizes");
    }
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            if (!support(i, j) && w(i, j) != 0) {
                throw InconsistentDataError("observed transition " + std::to_string(i + 1) +
                                            " -> " + std::to_string(j + 1) +
                                            " is not allowed by the support");
            }
        }
    }
}

TransitionCounts count_transitions(const SequencePanel& panel) {
    if (!panel.complete()) {
        throw IncompleteDataError("transition counting needs a panel without missing cells");
    }
    CountMatrix w = CountMatrix::Zero(panel.states(), panel.states());
    for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
        for (int t = 1; t <= panel.horizon(); ++t) ++w(panel.at(k, t - 1), panel.at(k, t));
    }
    return {std::move(w)};
}

AggregateCounts aggregate(const SequencePanel& panel) {
    CountMatrix counts = CountMatrix::Zero(panel.horizon() + 1, panel.states());
    for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
        for (int t = 0; t <= panel.horizon(); ++t) {
            if (!panel.missing(k, t)) ++counts(t, panel.at(k, t));
        }
    }
    return AggregateCounts(std::move(counts));
}

SequencePanel load_panel(const std::filesystem::path& path, std::optional<int> states) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path.string());
    const auto rows = csv::read_rows(in);
    if (rows.empty()) return SequencePanel(states.value_or(1), 0);

    const auto width = rows.front().fields.size();
    Eigen::MatrixXi table(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(width));
    int largest = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& row = rows[k];
        if (row.fields.size() != width) {
            throw ParseError("expected " + std::to_string(width) + " columns, got " +
                                 std::to_string(row.fields.size()),
                             row.line);
        }
        for (std::size_t t = 0; t < width; ++t) {
            const auto& field = row.fields[t];
            if (field == "NA") {
                table(k, t) = kMissing;
                continue;
            }
            const auto label = csv::parse_int(field);
            if (!label) throw ParseError("not a state label: '" + field + "'", row.line);
            if (*label < 1 || (states && *label > *states)) {
                throw DomainError("line " + std::to_string(row.line) + ": state label " +
                                  field + " outside 1.." +
                                  (states ? std::to_string(*states) : std::string("r")));
            }
            largest = std::max(largest, static_cast<int>(*label));
            table(k, t) = static_cast<int>(*label) - 1;
        }
    }
    return SequencePanel(states.value_or(std::max(largest, 1)), std::move(table));
}

void save_panel(const std::filesystem::path& path, const SequencePanel& panel,
                const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    if (!comment.empty()) out << "# " << comment << '\n';
    for (Eigen::Index k = 0; k < panel.individuals(); ++k) {
        for (int t = 0; t <= panel.horizon(); ++t) {
            if (t) out << ',';
            if (panel.missing(k, t)) {
                out << "NA";
            } else {
                out << panel.at(k, t) + 1;
            }
        }
        out << '\n';
    }
}

AggregateCounts load_counts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path.string());
    const auto rows = csv::read_rows(in);
    if (rows.empty()) throw ParseError("missing header 't,s1,...,sr'", 1);

    const auto& header = rows.front();
    if (header.fields.size() < 2 || header.fields[0] != "t") {
        throw ParseError("header must read 't,s1,...,sr'", header.line);
    }
    const auto r = static_cast<Eigen::Index>(header.fields.size() - 1);
    for (Eigen::Index j = 0; j < r; ++j) {
        if (header.fields[j + 1] != "s" + std::to_string(j + 1)) {
            throw ParseError("header column " + std::to_string(j + 2) + " should be s" +
                                 std::to_string(j + 1),
                             header.line);
        }
    }

    std::map<long long, Eigen::Matrix<long long, 1, Eigen::Dynamic>> by_time;
    for (std::size_t n = 1; n < rows.size(); ++n) {
        const auto& row = rows[n];
        if (static_cast<Eigen::Index>(row.fields.size()) != r + 1) {
            throw ParseError("expected " + std::to_string(r + 1) + " columns", row.line);
        }
        const auto t = csv::parse_int(row.fields[0]);
        if (!t || *t < 0) throw ParseError("bad time index '" + row.fields[0] + "'", row.line);
        if (by_time.count(*t)) throw ParseError("duplicate time " + row.fields[0], row.line);
        Eigen::Matrix<long long, 1, Eigen::Dynamic> values(r);
        for (Eigen::Index j = 0; j < r; ++j) {
            const auto v = csv::parse_int(row.fields[j + 1]);
            if (!v || *v < 0) {
                throw ParseError("bad count '" + row.fields[j + 1] + "'", row.line);
            }
            values[j] = *v;
        }
        by_time.emplace(*t, std::move(values));
    }
    const long long horizon = by_time.empty() ? 0 : by_time.rbegin()->first;
    CountMatrix counts = CountMatrix::Zero(horizon + 1, r);
    for (const auto& [t, values] : by_time) counts.row(t) = values;
    return AggregateCounts(std::move(counts));
}

void save_counts(const std::filesystem::path& path, const AggregateCounts& counts,
                 const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    if (!comment.empty()) out << "# " << comment << '\n';
    out << 't';
    for (int j = 0; j < counts.states(); ++j) out << ",s" << j + 1;
    out << '\n';
    for (int t = 0; t <= counts.horizon(); ++t) {
        out << t;
        for (int j = 0; j < counts.states(); ++j) out << ',' << counts.at(t, j);
        out << '\n';
    }
}

}  // namespace mkest
