#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "f2gnn/graph.hpp"
#include "f2gnn/metrics.hpp"
#include "f2gnn/nn.hpp"

namespace f2gnn {

struct FedHyper {
    double learning_rate = 0.01;
    double alpha = 2.0;   // fairness penalty weight (Eq. 3)
    double lambda = 2.0;  // data-bias weight scale (Eq. 4)
    double tau = 1.0;     // softmax temperature (Eq. 4)
    int local_epochs = 3;
    int rounds = 100;
    int clients_per_round = 0;  // K'; 0 selects all clients
    int hidden_dim = 64;
    Activation activation = Activation::relu;
    std::uint64_t server_seed = 0;

    // Negates the fairness sums before their softmax, up-weighting *fairer*
    // clients instead of the literal formulas' less-fair ones.
    bool invert_fairness_weight = false;

    // FedAvg-style behavior switches (baseline and tests).
    bool uniform_weights = false;          // gamma = 1/K' exactly
    bool interpolate = true;               // false: local init is the broadcast global
    std::optional<double> js_override;     // pin the interpolation coefficient

    bool soft_label_distribution = true;   // distributions from soft marginals
    bool early_stop = false;               // stop on validation-accuracy plateau
    int early_stop_patience = 10;
    bool local_eval_with_global = true;    // local metrics use the broadcast model
    bool local_metric_median = true;       // false: mean over clients instead
};

/// One client's private world: local graph, masks restricted to it, its
/// model and the structural bias score fixed at construction.
struct ClientState {
    int id = 0;
    Graph graph;
    NormalizedAdjacency adj;
    std::vector<int> global_ids;
    Mask train_mask, val_mask, test_mask;
    ModelParams params;
    double gbs = 0.0;
    double last_fair_loss = 0.0;

    ClientState(int id, ClientGraph cg, const Mask& global_train, const Mask& global_val,
                const Mask& global_test);
};

struct ClientUpload {
    int client_id = 0;
    ModelParams params;
    double delta_sp = 0.0;   // soft surrogate on the local train split
    double delta_eo = 0.0;
    double fair_loss = 0.0;  // delta_sp + delta_eo
    double gbs = 0.0;
    double js = 0.0;         // interpolation coefficient used this round
    bool sp_degenerate = false;
    bool eo_degenerate = false;
};

struct ServerWeights {
    Eigen::VectorXd gamma_e;      // softmax over GBS values
    Eigen::VectorXd gamma_f_raw;  // per-client delta_sp + delta_eo
    Eigen::VectorXd gamma_f;      // exp(softmax(gamma_f_raw))
    Eigen::VectorXd gamma;        // combined, on the simplex
};

struct RoundReport {
    int round = 0;
    std::vector<int> selected;
    std::vector<ClientUpload> uploads;  // in ascending client-id order
    ServerWeights weights;
    MetricBundle global;
    MetricBundle local_median;
};

struct ServerState {
    ModelParams params;
    int round = 0;
    FedHyper hyper;
};

// Computes the JS coefficient against the broadcast model, interpolates,
// runs `local_epochs` Adam steps on the penalized loss (fresh optimizer
// state per round) and reports the post-training soft fairness surrogates.
ClientUpload client_local_update(ClientState& client, const ModelParams& global_params,
                                 const FedHyper& hyper);

// Steps 1-3 of the server update: data-bias weight, model-fairness weight
// and the temperature-combined weight (all returned for reporting).
ServerWeights server_combined_weights(const std::vector<ClientUpload>& uploads, double lambda,
                                      double tau, bool invert_fairness_weight = false,
                                      bool uniform = false);

// Eq. 5: elementwise convex combination of the uploaded parameters.
ModelParams server_aggregate(const std::vector<ClientUpload>& uploads,
                             const Eigen::VectorXd& gamma);

/// Evaluation context: the full (pre-partition) graph with the global masks.
struct EvalContext {
    const Graph& graph;
    const NormalizedAdjacency& adj;
    const Mask& test_mask;
    const Mask& val_mask;
};

struct FederationResult {
    std::vector<RoundReport> rounds;
    ModelParams final_params;
};

// Algorithm-1 orchestration. Per round: sample K' clients without
// replacement, run local updates in client-id order, weight, aggregate,
// broadcast, evaluate on the global test mask and every client's local test
// mask (median). Fully deterministic given seeds.
FederationResult run_federation(ServerState& server, std::vector<ClientState>& clients,
                                const EvalContext& eval);

// Same orchestration with uniform weights, alpha = 0 and FedAvg local
// initialization (no interpolation).
FederationResult run_fedavg_baseline(ServerState& server, std::vector<ClientState>& clients,
                                     const EvalContext& eval);

// 50/25/25-style split of nodes into train/val/test by a seeded shuffle.
struct SplitMasks {
    Mask train, val, test;
};
SplitMasks split_nodes(int num_nodes, double train_fraction, double val_fraction,
                       double test_fraction, std::uint64_t seed);

// Builds per-client states from a partition, restricting the global masks.
std::vector<ClientState> make_clients(std::vector<ClientGraph> parts, const SplitMasks& global);

}  // namespace f2gnn
