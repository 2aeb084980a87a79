#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "f2gnn/graph.hpp"

namespace f2gnn {

/// Inputs of the closed-form correlation between a one-layer linear GCN
/// embedding column and the sensitive attribute.
struct LemmaInputs {
    double n0 = 0.0;
    double n1 = 0.0;
    double mu0 = 0.0;      // group mean of the feature column, s=0
    double mu1 = 0.0;      // group mean of the feature column, s=1
    double h_intra = 0.0;  // intra-group edge fraction
    double h_inter = 0.0;
    double sigma_z = 1.0;  // standard deviation of the embedding column
};

// (n0*mu0 - n1*mu1) * (h_intra - h_inter) * sqrt(n0*n1) / (sigma_z * N^2).
// Throws ZeroSigma when sigma_z <= 0.
double rho_closed_form(const LemmaInputs& in);

// Point-biserial correlation between column `column` of Z = A_hat X W and
// the sensitive attribute, where the embedding is the one-layer *linear*
// reduction used by the closed form. W defaults to identity column
// selection so the group means stay traceable.
double rho_empirical(const Graph& g, int column,
                     const std::optional<Eigen::MatrixXd>& w = std::nullopt);

// Closed-form inputs measured on a concrete graph: empirical edge-group
// fractions, group means of feature column `column`, and the standard
// deviation of the matching embedding column.
LemmaInputs lemma_inputs_from_graph(const Graph& g, int column);

struct SweepRow {
    double d_target = 0.0;         // requested |h_intra - h_inter|
    double d_realized_mean = 0.0;  // generated graphs' mean |h_intra - h_inter|
    int seed_count = 0;
    double mean_abs_rho_empirical = 0.0;
    double mean_abs_rho_closed_form = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // sorted by d_target

    std::string csv() const;  // d,seed_count,mean_abs_rho_empirical,rho_closed_form
};

// Returns the SBM edge probabilities that hit a target |h_intra - h_inter|
// in expectation while keeping the expected edge count of `base` fixed.
// Throws UnrealizableD when no probabilities in [0,1] achieve it.
std::pair<double, double> edge_probabilities_for_gap(const SbmConfig& base, double d_target);

// For each target d: generate one graph per seed, average |rho_empirical|
// and |rho_closed_form| over seeds and feature columns.
SweepResult theorem_sweep(const SbmConfig& base, const std::vector<double>& d_values,
                          const std::vector<std::uint64_t>& seeds);

}  // namespace f2gnn
