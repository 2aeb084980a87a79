#include "f2gnn/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "f2gnn/errors.hpp"
#include "f2gnn/rng.hpp"
#include "f2gnn/theory.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace f2gnn {

namespace {

json to_json(const MetricBundle& b) {
    return json{{"accuracy", b.accuracy},   {"auc", b.auc},
                {"delta_sp", b.delta_sp},   {"delta_eo", b.delta_eo},
                {"tradeoff_acc", std::isinf(b.tradeoff_acc) ? json() : json(b.tradeoff_acc)},
                {"tradeoff_auc", std::isinf(b.tradeoff_auc) ? json() : json(b.tradeoff_auc)},
                {"flags", b.flags.to_string()}};
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

// Base64 of the wire-format parameter buffer, for the record/replay file.
std::string base64(const std::vector<std::uint8_t>& bytes) {
    static const char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
        if (i + 1 < bytes.size()) chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
        if (i + 2 < bytes.size()) chunk |= static_cast<std::uint32_t>(bytes[i + 2]);
        const std::size_t produced = std::min<std::size_t>(3, bytes.size() - i) + 1;
        for (std::size_t k = 0; k < 4; ++k)
            out += k < produced ? table[(chunk >> (18 - 6 * k)) & 0x3f] : '=';
    }
    return out;
}

json round_to_json(const RoundReport& r, std::uint64_t seed, bool with_params) {
    json uploads = json::array();
    for (const auto& u : r.uploads) {
        json entry{{"client", u.client_id}, {"js", u.js},
                   {"gbs", u.gbs},          {"delta_sp", u.delta_sp},
                   {"delta_eo", u.delta_eo}, {"fair_loss", u.fair_loss}};
        if (u.sp_degenerate) entry["sp_degenerate"] = true;
        if (u.eo_degenerate) entry["eo_degenerate"] = true;
        if (with_params) entry["params_b64"] = base64(u.params.to_bytes());
        uploads.push_back(std::move(entry));
    }
    return json{{"seed", seed},
                {"round", r.round},
                {"selected", r.selected},
                {"uploads", std::move(uploads)},
                {"gamma_e", vector_to_json(r.weights.gamma_e)},
                {"gamma_f_raw", vector_to_json(r.weights.gamma_f_raw)},
                {"gamma_f", vector_to_json(r.weights.gamma_f)},
                {"gamma", vector_to_json(r.weights.gamma)},
                {"global", to_json(r.global)},
                {"local_median", to_json(r.local_median)}};
}

std::string format_metric_row(const std::string& scope, const std::string& seed,
                              const MetricBundle& b) {
    return scope + "," + seed + "," + b.csv_row() + "\n";
}

MetricBundle mean_bundle_over(const std::vector<MetricBundle>& bundles) {
    MetricBundle out;
    if (bundles.empty()) return out;
    for (const auto& b : bundles) {
        out.accuracy += b.accuracy;
        out.auc += b.auc;
        out.delta_sp += b.delta_sp;
        out.delta_eo += b.delta_eo;
    }
    const auto n = static_cast<double>(bundles.size());
    out.accuracy /= n;
    out.auc /= n;
    out.delta_sp /= n;
    out.delta_eo /= n;
    std::tie(out.tradeoff_acc, out.tradeoff_auc) =
        tradeoffs(out.accuracy, out.auc, out.delta_sp, out.delta_eo, &out.flags);
    return out;
}

MetricBundle std_bundle_over(const std::vector<MetricBundle>& bundles, const MetricBundle& mean) {
    MetricBundle out;
    if (bundles.size() < 2) return out;
    for (const auto& b : bundles) {
        out.accuracy += (b.accuracy - mean.accuracy) * (b.accuracy - mean.accuracy);
        out.auc += (b.auc - mean.auc) * (b.auc - mean.auc);
        out.delta_sp += (b.delta_sp - mean.delta_sp) * (b.delta_sp - mean.delta_sp);
        out.delta_eo += (b.delta_eo - mean.delta_eo) * (b.delta_eo - mean.delta_eo);
    }
    const auto n = static_cast<double>(bundles.size());
    out.accuracy = std::sqrt(out.accuracy / n);
    out.auc = std::sqrt(out.auc / n);
    out.delta_sp = std::sqrt(out.delta_sp / n);
    out.delta_eo = std::sqrt(out.delta_eo / n);
    out.tradeoff_acc = 0.0;
    out.tradeoff_auc = 0.0;
    return out;
}

struct PredictionRows {
    Eigen::VectorXd scores;
    std::vector<int> labels;
    std::vector<int> sensitive;
};

PredictionRows load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open predictions file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("predictions file is empty: " + path);
    if (line != "node_id,sensitive,label,score")
        throw FormatError("predictions header must be node_id,sensitive,label,score");
    std::vector<double> scores;
    PredictionRows rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        int id = 0, s = 0, y = 0;
        double score = 0.0;
        if (std::sscanf(line.c_str(), "%d,%d,%d,%lf", &id, &s, &y, &score) != 4)
            throw FormatError("bad predictions row " + std::to_string(lineno));
        if ((s != 0 && s != 1) || (y != 0 && y != 1))
            throw BinaryViolation("sensitive/label must be 0 or 1 at row " + std::to_string(lineno));
        rows.sensitive.push_back(s);
        rows.labels.push_back(y);
        scores.push_back(score);
    }
    rows.scores = Eigen::Map<Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size()));
    return rows;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp);
        out << content;
        if (!out) throw IoError("short write to " + tmp);
    }
    fs::rename(tmp, path);
}

double RunSummary::mean_global_accuracy() const {
    double acc = 0.0;
    for (const auto& s : seeds) acc += s.global.accuracy;
    return seeds.empty() ? 0.0 : acc / static_cast<double>(seeds.size());
}

double RunSummary::mean_global_unfairness() const {
    double u = 0.0;
    for (const auto& s : seeds) u += s.global.delta_sp + s.global.delta_eo;
    return seeds.empty() ? 0.0 : u / static_cast<double>(seeds.size());
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    write_file_atomic((fs::path(out_dir) / "resolved_config.txt").string(), cfg.dump());

    RunSummary summary;
    summary.mode = cfg.mode;

    if (cfg.mode == RunMode::audit) {
        const auto rows = load_predictions(cfg.predictions_file);
        const Mask all(rows.labels.size(), 1);
        const auto bundle = evaluate(rows.scores, rows.labels, rows.sensitive, all);
        std::string csv = "scope,seed," + MetricBundle::csv_header() + "\n";
        csv += format_metric_row("audit", "-", bundle);
        write_file_atomic((fs::path(out_dir) / "metrics.csv").string(), csv);
        SeedOutcome outcome;
        outcome.global = bundle;
        summary.seeds.push_back(outcome);
        return summary;
    }

    if (cfg.mode == RunMode::theory_sweep) {
        const auto sweep = theorem_sweep(cfg.sbm, cfg.d_values, cfg.sweep_seeds);
        write_file_atomic((fs::path(out_dir) / "sweep.csv").string(), sweep.csv());
        return summary;
    }

    DatasetSummary data_summary;
    const Graph graph = load_dataset(cfg, &data_summary);
    std::cout << "dataset: N=" << data_summary.num_nodes << " |E|=" << data_summary.num_edges
              << " groups=" << data_summary.group0 << "/" << data_summary.group1
              << " gbs=" << data_summary.gbs;
    if (data_summary.load.isolated_removed > 0)
        std::cout << " (removed " << data_summary.load.isolated_removed << " isolated nodes)";
    if (data_summary.load.self_loops_rejected > 0)
        std::cout << " (rejected " << data_summary.load.self_loops_rejected << " self-loop rows)";
    if (data_summary.load.duplicate_edges > 0)
        std::cout << " (merged " << data_summary.load.duplicate_edges << " duplicate edge rows)";
    std::cout << "\n";

    const NormalizedAdjacency global_adj(graph);
    const auto parts = partition_ego_networks(graph, cfg.k_clients, cfg.hops, cfg.partition_seed);

    std::string rounds_log;
    std::string record_log;
    std::vector<MetricBundle> final_globals, final_locals;
    ModelParams last_model;

    for (const auto split_seed : cfg.split_seeds) {
        const auto masks = split_nodes(graph.num_nodes, cfg.train_fraction, cfg.val_fraction,
                                       cfg.test_fraction, split_seed);
        auto clients = make_clients(parts, masks);

        ServerState server;
        server.hyper = cfg.hyper();
        // Distinct model init and client sampling per data split.
        server.hyper.server_seed = Rng(cfg.server_seed).child(split_seed).next_u64();
        server.params = glorot_init(graph.feature_dim(), cfg.hidden_dim, server.hyper.server_seed);

        const EvalContext eval{graph, global_adj, masks.test, masks.val};
        const auto result = cfg.mode == RunMode::fedavg_baseline
                                ? run_fedavg_baseline(server, clients, eval)
                                : run_federation(server, clients, eval);

        for (const auto& round : result.rounds) {
            rounds_log += round_to_json(round, split_seed, false).dump() + "\n";
            if (cfg.record_uploads)
                record_log += round_to_json(round, split_seed, true).dump() + "\n";
        }

        SeedOutcome outcome;
        outcome.split_seed = split_seed;
        outcome.rounds_run = static_cast<int>(result.rounds.size());
        if (!result.rounds.empty()) {
            outcome.global = result.rounds.back().global;
            outcome.local = result.rounds.back().local_median;
        }
        final_globals.push_back(outcome.global);
        final_locals.push_back(outcome.local);
        summary.seeds.push_back(outcome);
        last_model = result.final_params;
    }

    std::string csv = "scope,seed," + MetricBundle::csv_header() + "\n";
    for (const auto& outcome : summary.seeds) {
        csv += format_metric_row("global", std::to_string(outcome.split_seed), outcome.global);
        csv += format_metric_row(cfg.local_metric == "median" ? "local_median" : "local_mean",
                                 std::to_string(outcome.split_seed), outcome.local);
    }
    const auto global_mean = mean_bundle_over(final_globals);
    const auto local_mean = mean_bundle_over(final_locals);
    csv += format_metric_row("global", "mean", global_mean);
    csv += format_metric_row("global", "std", std_bundle_over(final_globals, global_mean));
    csv += format_metric_row(cfg.local_metric == "median" ? "local_median" : "local_mean", "mean",
                             local_mean);
    csv += format_metric_row(cfg.local_metric == "median" ? "local_median" : "local_mean", "std",
                             std_bundle_over(final_locals, local_mean));

    write_file_atomic((fs::path(out_dir) / "rounds.jsonl").string(), rounds_log);
    if (cfg.record_uploads)
        write_file_atomic((fs::path(out_dir) / "record.jsonl").string(), record_log);
    write_file_atomic((fs::path(out_dir) / "metrics.csv").string(), csv);
    {
        // Checkpoint of the last split's final model, in the wire format.
        const auto bytes = last_model.to_bytes();
        const std::string payload(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        write_file_atomic((fs::path(out_dir) / "model.ckpt").string(), payload);
    }
    return summary;
}

}  // namespace f2gnn
