#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace f2gnn {

/// Undirected simple graph with per-node binary sensitive attribute,
/// binary label and a dense feature row. Edges are stored canonically
/// (u < v, sorted, deduplicated) and never include self-loops; the GCN
/// adds self-loops only inside its normalization.
struct Graph {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;
    Eigen::MatrixXd features;   // N x d
    std::vector<int> sensitive;  // values in {0, 1}
    std::vector<int> labels;     // values in {0, 1}

    int feature_dim() const { return static_cast<int>(features.cols()); }
    std::int64_t num_edges() const { return static_cast<std::int64_t>(edges.size()); }

    // Throws GraphError if any invariant is violated.
    void validate() const;

    std::vector<std::vector<int>> adjacency_list() const;

    // Group sizes (N0, N1) by sensitive attribute.
    std::pair<int, int> group_counts() const;
};

// Sorts, canonicalizes and deduplicates `edges` in place. Self-loops are an error.
void canonicalize_edges(std::vector<std::pair<int, int>>& edges);

struct EdgeGroupStats {
    std::int64_t n_inter = 0;
    std::int64_t n_intra = 0;
    double h_inter = 0.0;
    double h_intra = 0.0;
    double gbs = 0.0;  // 1 - |h_intra - h_inter|
};

// Classifies every edge as inter-group (endpoint attributes differ) or
// intra-group and returns counts, fractions and the group balance score.
// Throws EmptyEdgeSet when the graph has no edges.
EdgeGroupStats edge_group_stats(const Graph& g);

enum class LabelRule {
    by_feature_threshold,  // label = 1 iff feature column 0 exceeds the pooled mean
    by_group_with_flip,    // label = sensitive XOR Bernoulli(flip_prob)
};

struct SbmConfig {
    int n0 = 0;
    int n1 = 0;
    double p_intra = 0.0;
    double p_inter = 0.0;
    Eigen::VectorXd mean0;  // length d
    Eigen::VectorXd mean1;
    Eigen::VectorXd std0;   // entries > 0
    Eigen::VectorXd std1;
    LabelRule label_rule = LabelRule::by_group_with_flip;
    double flip_prob = 0.0;
    std::uint64_t seed = 0;

    int feature_dim() const { return static_cast<int>(mean0.size()); }
    void validate() const;  // throws ValidationError
};

// Two-block stochastic block model: nodes 0..n0-1 carry s=0, the rest s=1.
// Every intra-group pair is connected independently with p_intra, inter-group
// pairs with p_inter. Features are drawn per group from the configured
// Gaussians. Fully determined by cfg.seed.
Graph generate_sbm(const SbmConfig& cfg);

struct ClientGraph {
    Graph graph;
    std::vector<int> global_ids;  // local id -> global id, ascending
    int center = -1;              // global id of the ego center
};

// Induced subgraph on all nodes within `hops` of `center`; local node ids
// follow ascending global id.
ClientGraph ego_network(const Graph& g, int center, int hops);

// Samples k distinct ego-network centers (seeded, without replacement) and
// returns the induced subgraph of all nodes within `hops` of each center.
// Clients may overlap. Centers whose ego-network has no edges are re-sampled
// up to a bounded retry budget, then EmptyClient is thrown.
std::vector<ClientGraph> partition_ego_networks(const Graph& g, int k_clients, int hops,
                                                std::uint64_t seed);

// Drops degree-0 nodes and remaps ids contiguously. Returns the number removed.
int remove_isolated_nodes(Graph& g);

struct LoadStats {
    int duplicate_edges = 0;
    int self_loops_rejected = 0;
    int isolated_removed = 0;
};

// CSV loaders. Node file header: node_id,sensitive,label,f1,...,fd with
// contiguous ids from 0. Edge file header: src,dst; reversed duplicates are
// merged and self-loop rows rejected (counted in stats). Isolated nodes are
// removed. Throws FormatError / BinaryViolation with the offending row.
Graph load_graph_csv(const std::string& node_path, const std::string& edge_path,
                     LoadStats* stats = nullptr);

void save_graph_csv(const Graph& g, const std::string& node_path, const std::string& edge_path);

}  // namespace f2gnn
