#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "f2gnn/federation.hpp"
#include "f2gnn/graph.hpp"

namespace f2gnn {

enum class RunMode { federate, fedavg_baseline, theory_sweep, audit };

std::string to_string(RunMode mode);
std::string to_string(Activation act);
std::string to_string(LabelRule rule);

/// Everything a run needs, resolved from the line-oriented
/// `[section]` / `key = value` config format. Unknown keys are hard errors
/// and every seed is explicit; nothing falls back to wall-clock state.
struct ExperimentConfig {
    // [run]
    RunMode mode = RunMode::federate;
    std::string out_dir = "out";
    std::vector<std::uint64_t> split_seeds{1};

    // [data]
    std::string source = "sbm";  // "files" | "sbm"
    std::string node_file;
    std::string edge_file;
    std::string predictions_file;  // audit mode
    SbmConfig sbm;

    // [partition]
    int k_clients = 10;
    int hops = 3;
    std::uint64_t partition_seed = 1;

    // [model]
    int hidden_dim = 64;
    Activation activation = Activation::relu;

    // [train]
    double learning_rate = 0.01;
    double alpha = 2.0;
    int local_epochs = 3;
    int rounds = 100;
    int clients_per_round = 0;  // 0 = all
    bool early_stop = false;
    int early_stop_patience = 10;
    std::uint64_t server_seed = 1;

    // [server]
    double lambda = 2.0;
    double tau = 1.0;
    bool invert_fairness_weight = false;

    // [eval]
    double train_fraction = 0.5;
    double val_fraction = 0.25;
    double test_fraction = 0.25;
    std::string local_metric = "median";      // "median" | "mean"
    std::string label_dist = "soft";          // "soft" | "hard"
    std::string local_eval_model = "global";  // "global" | "local"
    bool record_uploads = false;

    // [theory]
    std::vector<double> d_values{0.0, 0.2, 0.4, 0.6, 0.8};
    std::vector<std::uint64_t> sweep_seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

    void validate() const;  // throws ValidationError
    FedHyper hyper() const;

    // Resolved dump in the same format; parsing it back yields an identical
    // config.
    std::string dump() const;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

struct DatasetSummary {
    int num_nodes = 0;
    std::int64_t num_edges = 0;
    int group0 = 0;
    int group1 = 0;
    double gbs = 0.0;
    LoadStats load;
};

// Loads or generates the configured graph with isolated nodes removed, and
// reports the Table-style summary (N, |E|, group sizes, GBS).
Graph load_dataset(const ExperimentConfig& cfg, DatasetSummary* summary = nullptr);

}  // namespace f2gnn
