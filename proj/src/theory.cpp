#include "f2gnn/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "f2gnn/errors.hpp"
#include "f2gnn/metrics.hpp"
#include "f2gnn/nn.hpp"

namespace f2gnn {

double rho_closed_form(const LemmaInputs& in) {
    if (in.sigma_z <= 0.0) throw ZeroSigma("rho_closed_form: sigma_z must be positive");
    if (in.n0 < 1.0 || in.n1 < 1.0) throw ValidationError("rho_closed_form: empty group");
    const double n = in.n0 + in.n1;
    return (in.n0 * in.mu0 - in.n1 * in.mu1) * (in.h_intra - in.h_inter) *
           std::sqrt(in.n0 * in.n1) / (in.sigma_z * n * n);
}

namespace {

Eigen::VectorXd embedding_column(const Graph& g, int column,
                                 const std::optional<Eigen::MatrixXd>& w) {
    if (column < 0) throw ValidationError("rho_empirical: negative column");
    const NormalizedAdjacency adj(g);
    if (w) {
        if (w->rows() != g.feature_dim())
            throw ShapeMismatch("rho_empirical: W row count != feature dim");
        if (column >= w->cols()) throw ValidationError("rho_empirical: column out of range");
        return adj.multiply(Eigen::MatrixXd(g.features * (*w))).col(column);
    }
    if (column >= g.feature_dim()) throw ValidationError("rho_empirical: column out of range");
    return adj.multiply(Eigen::VectorXd(g.features.col(column)));
}

}  // namespace

double rho_empirical(const Graph& g, int column, const std::optional<Eigen::MatrixXd>& w) {
    return point_biserial(embedding_column(g, column, w), g.sensitive);
}

LemmaInputs lemma_inputs_from_graph(const Graph& g, int column) {
    const auto [n0, n1] = g.group_counts();
    if (n0 == 0 || n1 == 0) throw EmptyGroup("lemma inputs: one sensitive group is empty");
    const auto stats = edge_group_stats(g);
    const Eigen::VectorXd z = embedding_column(g, column, std::nullopt);

    LemmaInputs in;
    in.n0 = static_cast<double>(n0);
    in.n1 = static_cast<double>(n1);
    double sum0 = 0.0, sum1 = 0.0;
    for (int i = 0; i < g.num_nodes; ++i) {
        if (g.sensitive[static_cast<std::size_t>(i)] == 0)
            sum0 += g.features(i, column);
        else
            sum1 += g.features(i, column);
    }
    in.mu0 = sum0 / in.n0;
    in.mu1 = sum1 / in.n1;
    in.h_intra = stats.h_intra;
    in.h_inter = stats.h_inter;
    const double mean = z.mean();
    in.sigma_z = std::sqrt((z.array() - mean).square().sum() / static_cast<double>(z.size()));
    return in;
}

std::pair<double, double> edge_probabilities_for_gap(const SbmConfig& base, double d_target) {
    if (d_target < 0.0 || d_target > 1.0)
        throw UnrealizableD("target gap must lie in [0,1]");
    const double n0 = base.n0, n1 = base.n1;
    const double intra_pairs = 0.5 * (n0 * (n0 - 1.0) + n1 * (n1 - 1.0));
    const double inter_pairs = n0 * n1;
    const double budget = base.p_intra * intra_pairs + base.p_inter * inter_pairs;
    if (budget <= 0.0) throw UnrealizableD("base config has no expected edges");

    // Split the fixed budget so E[intra]/E[total] = (1 + d)/2.
    const double p_intra = budget * (1.0 + d_target) / (2.0 * intra_pairs);
    const double p_inter = budget * (1.0 - d_target) / (2.0 * inter_pairs);
    if (p_intra > 1.0 || p_inter > 1.0)
        throw UnrealizableD("edge budget cannot realize gap " + std::to_string(d_target));
    return {p_intra, p_inter};
}

SweepResult theorem_sweep(const SbmConfig& base, const std::vector<double>& d_values,
                          const std::vector<std::uint64_t>& seeds) {
    base.validate();
    if (seeds.empty()) throw ValidationError("theorem_sweep: need at least one seed");
    std::vector<double> sorted_d = d_values;
    std::sort(sorted_d.begin(), sorted_d.end());

    SweepResult result;
    for (double d : sorted_d) {
        const auto [p_intra, p_inter] = edge_probabilities_for_gap(base, d);
        SbmConfig cfg = base;
        cfg.p_intra = p_intra;
        cfg.p_inter = p_inter;

        SweepRow row;
        row.d_target = d;
        row.seed_count = static_cast<int>(seeds.size());
        double sum_emp = 0.0, sum_closed = 0.0, sum_realized = 0.0;
        long samples = 0;
        for (const auto seed : seeds) {
            cfg.seed = seed;
            const Graph g = generate_sbm(cfg);
            const auto stats = edge_group_stats(g);
            sum_realized += std::abs(stats.h_intra - stats.h_inter);
            for (int col = 0; col < g.feature_dim(); ++col) {
                sum_emp += std::abs(rho_empirical(g, col));
                sum_closed += std::abs(rho_closed_form(lemma_inputs_from_graph(g, col)));
                ++samples;
            }
        }
        row.d_realized_mean = sum_realized / static_cast<double>(seeds.size());
        row.mean_abs_rho_empirical = sum_emp / static_cast<double>(samples);
        row.mean_abs_rho_closed_form = sum_closed / static_cast<double>(samples);
        result.rows.push_back(row);
    }
    return result;
}

std::string SweepResult::csv() const {
    std::string out = "d,seed_count,mean_abs_rho_empirical,rho_closed_form\n";
    char buf[160];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f,%d,%.6f,%.6f\n", row.d_target, row.seed_count,
                      row.mean_abs_rho_empirical, row.mean_abs_rho_closed_form);
        out += buf;
    }
    return out;
}

}  // namespace f2gnn
