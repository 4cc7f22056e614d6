#include "mkest/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <cstdio>
#include <optional>

#include "csv.hpp"
#include "mkest/errors.hpp"

namespace mkest {

namespace {

constexpr std::pair<KernelId, const char*> kKernelNames[] = {
    {KernelId::Conjugate, "conjugate"}, {KernelId::Gibbs, "gibbs"},
    {KernelId::Basic, "basic"},         {KernelId::Dcs, "dcs"},
    {KernelId::Rcs, "rcs"},             {KernelId::DcsCoarse, "dcs-coarse"},
    {KernelId::RcsCoarse, "rcs-coarse"},
};

EntrySummary summarize_values(MatrixEntry entry, std::vector<double>& values) {
    if (values.empty()) throw ParameterError("no draws left after burn-in");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::sort(values.begin(), values.end());
    return {entry, mean, sd, sorted_quantile(values, 0.025), sorted_quantile(values, 0.975)};
}

}  // namespace

const char* kernel_name(KernelId id) {
    for (const auto& [k, name] : kKernelNames) {
        if (k == id) return name;
    }
    return "unknown";
}

KernelId parse_kernel(const std::string& name) {
    for (const auto& [k, n] : kKernelNames) {
        if (name == n) return k;
    }
    throw ConfigError("unknown kernel '" + name + "'");
}

Eigen::MatrixXd entry_trace(const PosteriorSample& sample, std::span<const MatrixEntry> entries,
                            std::size_t first) {
    const std::size_t n = sample.draws.size() > first ? sample.draws.size() - first : 0;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(entries.size()));
    for (std::size_t h = 0; h < n; ++h) {
        const auto& psi = sample.draws[first + h].psi;
        for (std::size_t e = 0; e < entries.size(); ++e) {
            out(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(e)) =
                psi(entries[e].row, entries[e].col);
        }
    }
    return out;
}

double sorted_quantile(std::span<const double> sorted, double prob) {
    if (sorted.empty()) throw ParameterError("quantile of an empty sample");
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<EntrySummary> summarize(std::span<const PosteriorSample> chains, std::size_t burn_in) {
    if (chains.empty()) throw ParameterError("no chains to summarize");
    const TransitionMatrix shape(Eigen::MatrixXd::Zero(chains[0].support.rows(),
                                                       chains[0].support.cols()),
                                 chains[0].support);
    std::vector<EntrySummary> out;
    for (const auto& entry : shape.supported_entries()) {
        std::vector<double> values;
        for (const auto& chain : chains) {
            for (std::size_t h = burn_in; h < chain.draws.size(); ++h) {
                values.push_back(chain.draws[h].psi(entry.row, entry.col));
            }
        }
        out.push_back(summarize_values(entry, values));
    }
    return out;
}

std::vector<EntrySummary> summarize_eta(std::span<const PosteriorSample> chains,
                                        std::size_t burn_in) {
    std::vector<EntrySummary> out;
    if (chains.empty() || chains[0].draws.empty() || chains[0].draws[0].eta.size() == 0) return out;
    for (Eigen::Index i = 0; i < chains[0].draws[0].eta.size(); ++i) {
        std::vector<double> values;
        for (const auto& chain : chains) {
            for (std::size_t h = burn_in; h < chain.draws.size(); ++h) {
                values.push_back(chain.draws[h].eta[i]);
            }
        }
        out.push_back(summarize_values({i, -1}, values));
    }
    return out;
}

Eigen::MatrixXd posterior_mean(std::span<const PosteriorSample> chains, std::size_t burn_in) {
    if (chains.empty()) throw ParameterError("no chains to average");
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(chains[0].support.rows(), chains[0].support.cols());
    std::size_t n = 0;
    for (const auto& chain : chains) {
        for (std::size_t h = burn_in; h < chain.draws.size(); ++h, ++n) sum += chain.draws[h].psi;
    }
    if (n == 0) throw ParameterError("no draws left after burn-in");
    return sum / static_cast<double>(n);
}

void write_posterior(const std::filesystem::path& path, std::span<const PosteriorSample> chains,
                     const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    if (!comment.empty()) out << "# " << comment << '\n';
    if (chains.empty()) return;

    const SupportMask& support = chains[0].support;
    const TransitionMatrix shape(Eigen::MatrixXd::Zero(support.rows(), support.cols()), support);
    const auto entries = shape.supported_entries();
    const auto& first = chains[0].draws.empty() ? Draw{} : chains[0].draws[0];
    const Eigen::Index n_eta = first.eta.size();
    const Eigen::Index n_d = first.d.size();
    const bool mh = n_d > 0;

    out << "iter,chain";
    for (const auto& e : entries) out << ",psi_" << e.row + 1 << '_' << e.col + 1;
    for (Eigen::Index i = 0; i < n_eta; ++i) out << ",eta_" << i + 1;
    if (mh) {
        out << ",accepted,kernel";
        for (Eigen::Index i = 0; i < n_d; ++i) out << ",d_" << i + 1;
        out << ",fallback";
    }
    out << '\n';

    for (const auto& chain : chains) {
        for (std::size_t h = 0; h < chain.draws.size(); ++h) {
            const auto& draw = chain.draws[h];
            out << h << ',' << chain.chain;
            for (const auto& e : entries) out << ',' << csv::format_double(draw.psi(e.row, e.col));
            for (Eigen::Index i = 0; i < n_eta; ++i) out << ',' << csv::format_double(draw.eta[i]);
            if (mh) {
                out << ',' << (draw.accepted ? 1 : 0) << ',' << kernel_name(draw.kernel);
                for (Eigen::Index i = 0; i < n_d; ++i) out << ',' << csv::format_double(draw.d[i]);
                out << ',' << (draw.fallback ? 1 : 0);
            }
            out << '\n';
        }
    }
}

std::vector<PosteriorSample> read_posterior(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path.string());
    const auto rows = csv::read_rows(in);
    if (rows.empty()) throw ParseError("posterior file has no header", 1);

    const auto& header = rows.front();
    if (header.fields.size() < 3 || header.fields[0] != "iter" || header.fields[1] != "chain") {
        throw ParseError("posterior header must start with 'iter,chain'", header.line);
    }
    std::vector<MatrixEntry> entries;
    std::vector<std::size_t> entry_cols, eta_cols, d_cols;
    std::optional<std::size_t> accepted_col, kernel_col, fallback_col;
    Eigen::Index r = 0;
    for (std::size_t c = 2; c < header.fields.size(); ++c) {
        const auto& name = header.fields[c];
        int i = 0, j = 0;
        if (std::sscanf(name.c_str(), "psi_%d_%d", &i, &j) == 2 && i >= 1 && j >= 1) {
            entries.push_back({i - 1, j - 1});
            entry_cols.push_back(c);
            r = std::max<Eigen::Index>({r, i, j});
        } else if (name.rfind("eta_", 0) == 0) {
            eta_cols.push_back(c);
        } else if (name.rfind("d_", 0) == 0) {
            d_cols.push_back(c);
        } else if (name == "accepted") {
            accepted_col = c;
        } else if (name == "kernel") {
            kernel_col = c;
        } else if (name == "fallback") {
            fallback_col = c;
        }
    }
    if (entries.empty()) throw ParseError("posterior header has no psi_i_j columns", header.line);
    SupportMask support = SupportMask::Constant(r, r, false);
    for (const auto& e : entries) support(e.row, e.col) = true;

    std::map<int, PosteriorSample> by_chain;
    for (std::size_t n = 1; n < rows.size(); ++n) {
        const auto& row = rows[n];
        if (row.fields.size() != header.fields.size()) {
            throw ParseError("expected " + std::to_string(header.fields.size()) + " columns",
                             row.line);
        }
        auto number = [&](std::size_t c) {
            const auto v = csv::parse_double(row.fields[c]);
            if (!v) throw ParseError("not a number: '" + row.fields[c] + "'", row.line);
            return *v;
        };
        const int chain = static_cast<int>(number(1));
        auto& sample = by_chain[chain];
        sample.chain = chain;
        sample.support = support;
        Draw draw;
        draw.psi = Eigen::MatrixXd::Zero(r, r);
        for (std::size_t e = 0; e < entries.size(); ++e) {
            draw.psi(entries[e].row, entries[e].col) = number(entry_cols[e]);
        }
        draw.eta.resize(static_cast<Eigen::Index>(eta_cols.size()));
        for (std::size_t i = 0; i < eta_cols.size(); ++i) draw.eta[i] = number(eta_cols[i]);
        draw.d.resize(static_cast<Eigen::Index>(d_cols.size()));
        for (std::size_t i = 0; i < d_cols.size(); ++i) draw.d[i] = number(d_cols[i]);
        if (accepted_col) draw.accepted = number(*accepted_col) != 0.0;
        if (fallback_col) draw.fallback = number(*fallback_col) != 0.0;
        if (kernel_col) draw.kernel = parse_kernel(row.fields[*kernel_col]);
        sample.draws.push_back(std::move(draw));
    }
    std::vector<PosteriorSample> out;
    for (auto& [id, sample] : by_chain) out.push_back(std::move(sample));
    return out;
}

}  // namespace mkest
