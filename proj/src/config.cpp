#include "f2gnn/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "f2gnn/errors.hpp"

namespace f2gnn {

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::federate: return "federate";
        case RunMode::fedavg_baseline: return "fedavg_baseline";
        case RunMode::theory_sweep: return "theory_sweep";
        case RunMode::audit: return "audit";
    }
    return "?";
}

std::string to_string(Activation act) {
    return act == Activation::relu ? "relu" : "linear";
}

std::string to_string(LabelRule rule) {
    return rule == LabelRule::by_group_with_flip ? "group_flip" : "feature_threshold";
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line) + ": bad number for '" + key + "': " + v);
    }
}

long long parse_int(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line) + ": bad integer for '" + key + "': " + v);
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line) + ": bad seed for '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& v, const std::string& key, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ParseError("line " + std::to_string(line) + ": '" + key + "' must be true or false");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

// Length-d vector from a comma list; a single value broadcasts.
Eigen::VectorXd parse_vector(const std::string& v, int d, const std::string& key, int line) {
    const auto parts = split_list(v);
    if (parts.empty())
        throw ParseError("line " + std::to_string(line) + ": '" + key + "' needs values");
    if (parts.size() != 1 && static_cast<int>(parts.size()) != d)
        throw ParseError("line " + std::to_string(line) + ": '" + key + "' needs 1 or " +
                         std::to_string(d) + " values");
    Eigen::VectorXd out(d);
    for (int i = 0; i < d; ++i)
        out(i) = parse_double(parts[parts.size() == 1 ? 0 : static_cast<std::size_t>(i)], key, line);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v(i));
    }
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (source != "files" && source != "sbm")
        throw ValidationError("data.source must be 'files' or 'sbm'");
    if (mode == RunMode::audit) {
        if (predictions_file.empty())
            throw ValidationError("audit mode requires data.predictions_file");
    } else if (source == "files") {
        if (node_file.empty() || edge_file.empty())
            throw ValidationError("data.source=files requires node_file and edge_file");
    } else {
        sbm.validate();
    }
    if (split_seeds.empty()) throw ValidationError("run.split_seeds must not be empty");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw ValidationError("eval fractions must sum to 1");
    if (train_fraction <= 0.0 || val_fraction < 0.0 || test_fraction < 0.0)
        throw ValidationError("eval fractions must be nonnegative with train > 0");
    if (k_clients < 1) throw ValidationError("partition.k_clients must be >= 1");
    if (hops < 1) throw ValidationError("partition.hops must be >= 1");
    if (hidden_dim < 1) throw ValidationError("model.hidden_dim must be >= 1");
    if (learning_rate <= 0.0) throw ValidationError("train.learning_rate must be positive");
    if (local_epochs < 1) throw ValidationError("train.local_epochs must be >= 1");
    if (rounds < 0) throw ValidationError("train.rounds must be >= 0");
    if (clients_per_round < 0 || clients_per_round > k_clients)
        throw ValidationError("train.clients_per_round must lie in [0, k_clients]");
    if (tau <= 0.0) throw ValidationError("server.tau must be positive");
    if (local_metric != "median" && local_metric != "mean")
        throw ValidationError("eval.local_metric must be 'median' or 'mean'");
    if (label_dist != "soft" && label_dist != "hard")
        throw ValidationError("eval.label_dist must be 'soft' or 'hard'");
    if (local_eval_model != "global" && local_eval_model != "local")
        throw ValidationError("eval.local_eval_model must be 'global' or 'local'");
    if (mode == RunMode::theory_sweep) {
        if (source != "sbm") throw ValidationError("theory_sweep requires data.source=sbm");
        if (d_values.empty()) throw ValidationError("theory.d_values must not be empty");
        for (double d : d_values)
            if (d < 0.0 || d > 1.0) throw ValidationError("theory.d_values must lie in [0,1]");
        if (sweep_seeds.empty()) throw ValidationError("theory.sweep_seeds must not be empty");
    }
}

FedHyper ExperimentConfig::hyper() const {
    FedHyper h;
    h.learning_rate = learning_rate;
    h.alpha = alpha;
    h.lambda = lambda;
    h.tau = tau;
    h.local_epochs = local_epochs;
    h.rounds = rounds;
    h.clients_per_round = clients_per_round;
    h.hidden_dim = hidden_dim;
    h.activation = activation;
    h.server_seed = server_seed;
    h.invert_fairness_weight = invert_fairness_weight;
    h.soft_label_distribution = label_dist == "soft";
    h.early_stop = early_stop;
    h.early_stop_patience = early_stop_patience;
    h.local_eval_with_global = local_eval_model == "global";
    h.local_metric_median = local_metric == "median";
    return h;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    // The SBM feature dimension governs vector lengths, so it is resolved in
    // a first pass.
    int sbm_dim = 8;
    bool mode_seen = false;

    struct Pending {
        std::string section, key, value;
        int line;
    };
    std::vector<Pending> entries;
    {
        std::stringstream ss(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(ss, line)) {
            ++lineno;
            const auto stripped = trim(line.substr(0, line.find('#')));
            if (stripped.empty()) continue;
            if (stripped.front() == '[') {
                if (stripped.back() != ']')
                    throw ParseError(origin + " line " + std::to_string(lineno) +
                                     ": malformed section header");
                section = trim(stripped.substr(1, stripped.size() - 2));
                continue;
            }
            const auto eq = stripped.find('=');
            if (eq == std::string::npos)
                throw ParseError(origin + " line " + std::to_string(lineno) +
                                 ": expected 'key = value'");
            Pending p{section, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)), lineno};
            if (p.section.empty())
                throw ParseError(origin + " line " + std::to_string(lineno) +
                                 ": key outside any [section]");
            if (p.key.empty())
                throw ParseError(origin + " line " + std::to_string(lineno) + ": empty key");
            entries.push_back(std::move(p));
            if (entries.back().section == "data" && entries.back().key == "sbm_feature_dim")
                sbm_dim = static_cast<int>(parse_int(entries.back().value, "sbm_feature_dim", lineno));
        }
    }

    // Defaults for the SBM vectors depend on the resolved dimension.
    cfg.sbm.mean0 = Eigen::VectorXd::Constant(sbm_dim, 0.0);
    cfg.sbm.mean1 = Eigen::VectorXd::Constant(sbm_dim, 0.0);
    cfg.sbm.std0 = Eigen::VectorXd::Constant(sbm_dim, 1.0);
    cfg.sbm.std1 = Eigen::VectorXd::Constant(sbm_dim, 1.0);

    using Handler = std::function<void(const std::string&, int)>;
    const std::map<std::pair<std::string, std::string>, Handler> handlers = {
        {{"run", "mode"},
         [&](const std::string& v, int line) {
             if (v == "federate") cfg.mode = RunMode::federate;
             else if (v == "fedavg_baseline") cfg.mode = RunMode::fedavg_baseline;
             else if (v == "theory_sweep") cfg.mode = RunMode::theory_sweep;
             else if (v == "audit") cfg.mode = RunMode::audit;
             else throw ParseError("line " + std::to_string(line) + ": unknown mode '" + v + "'");
             mode_seen = true;
         }},
        {{"run", "out"}, [&](const std::string& v, int) { cfg.out_dir = v; }},
        {{"run", "split_seeds"},
         [&](const std::string& v, int line) {
             cfg.split_seeds.clear();
             for (const auto& item : split_list(v))
                 cfg.split_seeds.push_back(parse_u64(item, "split_seeds", line));
         }},
        {{"data", "source"}, [&](const std::string& v, int) { cfg.source = v; }},
        {{"data", "node_file"}, [&](const std::string& v, int) { cfg.node_file = v; }},
        {{"data", "edge_file"}, [&](const std::string& v, int) { cfg.edge_file = v; }},
        {{"data", "predictions_file"},
         [&](const std::string& v, int) { cfg.predictions_file = v; }},
        {{"data", "sbm_n0"},
         [&](const std::string& v, int line) { cfg.sbm.n0 = static_cast<int>(parse_int(v, "sbm_n0", line)); }},
        {{"data", "sbm_n1"},
         [&](const std::string& v, int line) { cfg.sbm.n1 = static_cast<int>(parse_int(v, "sbm_n1", line)); }},
        {{"data", "sbm_p_intra"},
         [&](const std::string& v, int line) { cfg.sbm.p_intra = parse_double(v, "sbm_p_intra", line); }},
        {{"data", "sbm_p_inter"},
         [&](const std::string& v, int line) { cfg.sbm.p_inter = parse_double(v, "sbm_p_inter", line); }},
        {{"data", "sbm_feature_dim"}, [&](const std::string&, int) { /* first pass */ }},
        {{"data", "sbm_mu0"},
         [&](const std::string& v, int line) { cfg.sbm.mean0 = parse_vector(v, sbm_dim, "sbm_mu0", line); }},
        {{"data", "sbm_mu1"},
         [&](const std::string& v, int line) { cfg.sbm.mean1 = parse_vector(v, sbm_dim, "sbm_mu1", line); }},
        {{"data", "sbm_std0"},
         [&](const std::string& v, int line) { cfg.sbm.std0 = parse_vector(v, sbm_dim, "sbm_std0", line); }},
        {{"data", "sbm_std1"},
         [&](const std::string& v, int line) { cfg.sbm.std1 = parse_vector(v, sbm_dim, "sbm_std1", line); }},
        {{"data", "sbm_label_rule"},
         [&](const std::string& v, int line) {
             if (v == "group_flip") cfg.sbm.label_rule = LabelRule::by_group_with_flip;
             else if (v == "feature_threshold") cfg.sbm.label_rule = LabelRule::by_feature_threshold;
             else throw ParseError("line " + std::to_string(line) + ": unknown label rule '" + v + "'");
         }},
        {{"data", "sbm_flip_prob"},
         [&](const std::string& v, int line) { cfg.sbm.flip_prob = parse_double(v, "sbm_flip_prob", line); }},
        {{"data", "sbm_seed"},
         [&](const std::string& v, int line) { cfg.sbm.seed = parse_u64(v, "sbm_seed", line); }},
        {{"partition", "k_clients"},
         [&](const std::string& v, int line) { cfg.k_clients = static_cast<int>(parse_int(v, "k_clients", line)); }},
        {{"partition", "hops"},
         [&](const std::string& v, int line) { cfg.hops = static_cast<int>(parse_int(v, "hops", line)); }},
        {{"partition", "seed"},
         [&](const std::string& v, int line) { cfg.partition_seed = parse_u64(v, "seed", line); }},
        {{"model", "hidden_dim"},
         [&](const std::string& v, int line) { cfg.hidden_dim = static_cast<int>(parse_int(v, "hidden_dim", line)); }},
        {{"model", "activation"},
         [&](const std::string& v, int line) {
             if (v == "relu") cfg.activation = Activation::relu;
             else if (v == "linear") cfg.activation = Activation::linear;
             else throw ParseError("line " + std::to_string(line) + ": unknown activation '" + v + "'");
         }},
        {{"train", "learning_rate"},
         [&](const std::string& v, int line) { cfg.learning_rate = parse_double(v, "learning_rate", line); }},
        {{"train", "alpha"},
         [&](const std::string& v, int line) { cfg.alpha = parse_double(v, "alpha", line); }},
        {{"train", "local_epochs"},
         [&](const std::string& v, int line) { cfg.local_epochs = static_cast<int>(parse_int(v, "local_epochs", line)); }},
        {{"train", "rounds"},
         [&](const std::string& v, int line) { cfg.rounds = static_cast<int>(parse_int(v, "rounds", line)); }},
        {{"train", "clients_per_round"},
         [&](const std::string& v, int line) { cfg.clients_per_round = static_cast<int>(parse_int(v, "clients_per_round", line)); }},
        {{"train", "early_stop"},
         [&](const std::string& v, int line) { cfg.early_stop = parse_bool(v, "early_stop", line); }},
        {{"train", "early_stop_patience"},
         [&](const std::string& v, int line) { cfg.early_stop_patience = static_cast<int>(parse_int(v, "early_stop_patience", line)); }},
        {{"train", "server_seed"},
         [&](const std::string& v, int line) { cfg.server_seed = parse_u64(v, "server_seed", line); }},
        {{"server", "lambda"},
         [&](const std::string& v, int line) { cfg.lambda = parse_double(v, "lambda", line); }},
        {{"server", "tau"},
         [&](const std::string& v, int line) { cfg.tau = parse_double(v, "tau", line); }},
        {{"server", "invert_fairness_weight"},
         [&](const std::string& v, int line) { cfg.invert_fairness_weight = parse_bool(v, "invert_fairness_weight", line); }},
        {{"eval", "train_fraction"},
         [&](const std::string& v, int line) { cfg.train_fraction = parse_double(v, "train_fraction", line); }},
        {{"eval", "val_fraction"},
         [&](const std::string& v, int line) { cfg.val_fraction = parse_double(v, "val_fraction", line); }},
        {{"eval", "test_fraction"},
         [&](const std::string& v, int line) { cfg.test_fraction = parse_double(v, "test_fraction", line); }},
        {{"eval", "local_metric"}, [&](const std::string& v, int) { cfg.local_metric = v; }},
        {{"eval", "label_dist"}, [&](const std::string& v, int) { cfg.label_dist = v; }},
        {{"eval", "local_eval_model"},
         [&](const std::string& v, int) { cfg.local_eval_model = v; }},
        {{"eval", "record_uploads"},
         [&](const std::string& v, int line) { cfg.record_uploads = parse_bool(v, "record_uploads", line); }},
        {{"theory", "d_values"},
         [&](const std::string& v, int line) {
             cfg.d_values.clear();
             for (const auto& item : split_list(v))
                 cfg.d_values.push_back(parse_double(item, "d_values", line));
         }},
        {{"theory", "sweep_seeds"},
         [&](const std::string& v, int line) {
             cfg.sweep_seeds.clear();
             for (const auto& item : split_list(v))
                 cfg.sweep_seeds.push_back(parse_u64(item, "sweep_seeds", line));
         }},
    };

    for (const auto& entry : entries) {
        const auto it = handlers.find({entry.section, entry.key});
        if (it == handlers.end())
            throw ParseError(origin + " line " + std::to_string(entry.line) + ": unknown key '" +
                             entry.section + "." + entry.key + "'");
        it->second(entry.value, entry.line);
    }

    if (!mode_seen) throw ValidationError(origin + ": run.mode is missing");
    cfg.validate();
    return cfg;
}

std::string ExperimentConfig::dump() const {
    std::string out;
    out += "[run]\n";
    out += "mode = " + to_string(mode) + "\n";
    out += "out = " + out_dir + "\n";
    out += "split_seeds = ";
    for (std::size_t i = 0; i < split_seeds.size(); ++i)
        out += (i ? "," : "") + std::to_string(split_seeds[i]);
    out += "\n\n[data]\n";
    out += "source = " + source + "\n";
    if (!node_file.empty()) out += "node_file = " + node_file + "\n";
    if (!edge_file.empty()) out += "edge_file = " + edge_file + "\n";
    if (!predictions_file.empty()) out += "predictions_file = " + predictions_file + "\n";
    if (source == "sbm") {
        out += "sbm_n0 = " + std::to_string(sbm.n0) + "\n";
        out += "sbm_n1 = " + std::to_string(sbm.n1) + "\n";
        out += "sbm_p_intra = " + format_double(sbm.p_intra) + "\n";
        out += "sbm_p_inter = " + format_double(sbm.p_inter) + "\n";
        out += "sbm_feature_dim = " + std::to_string(sbm.feature_dim()) + "\n";
        out += "sbm_mu0 = " + format_vector(sbm.mean0) + "\n";
        out += "sbm_mu1 = " + format_vector(sbm.mean1) + "\n";
        out += "sbm_std0 = " + format_vector(sbm.std0) + "\n";
        out += "sbm_std1 = " + format_vector(sbm.std1) + "\n";
        out += "sbm_label_rule = " + to_string(sbm.label_rule) + "\n";
        out += "sbm_flip_prob = " + format_double(sbm.flip_prob) + "\n";
        out += "sbm_seed = " + std::to_string(sbm.seed) + "\n";
    }
    out += "\n[partition]\n";
    out += "k_clients = " + std::to_string(k_clients) + "\n";
    out += "hops = " + std::to_string(hops) + "\n";
    out += "seed = " + std::to_string(partition_seed) + "\n";
    out += "\n[model]\n";
    out += "hidden_dim = " + std::to_string(hidden_dim) + "\n";
    out += "activation = " + to_string(activation) + "\n";
    out += "\n[train]\n";
    out += "learning_rate = " + format_double(learning_rate) + "\n";
    out += "alpha = " + format_double(alpha) + "\n";
    out += "local_epochs = " + std::to_string(local_epochs) + "\n";
    out += "rounds = " + std::to_string(rounds) + "\n";
    out += "clients_per_round = " + std::to_string(clients_per_round) + "\n";
    out += "early_stop = " + std::string(early_stop ? "true" : "false") + "\n";
    out += "early_stop_patience = " + std::to_string(early_stop_patience) + "\n";
    out += "server_seed = " + std::to_string(server_seed) + "\n";
    out += "\n[server]\n";
    out += "lambda = " + format_double(lambda) + "\n";
    out += "tau = " + format_double(tau) + "\n";
    out += "invert_fairness_weight = " + std::string(invert_fairness_weight ? "true" : "false") + "\n";
    out += "\n[eval]\n";
    out += "train_fraction = " + format_double(train_fraction) + "\n";
    out += "val_fraction = " + format_double(val_fraction) + "\n";
    out += "test_fraction = " + format_double(test_fraction) + "\n";
    out += "local_metric = " + local_metric + "\n";
    out += "label_dist = " + label_dist + "\n";
    out += "local_eval_model = " + local_eval_model + "\n";
    out += "record_uploads = " + std::string(record_uploads ? "true" : "false") + "\n";
    out += "\n[theory]\n";
    out += "d_values = ";
    for (std::size_t i = 0; i < d_values.size(); ++i)
        out += (i ? "," : "") + format_double(d_values[i]);
    out += "\nsweep_seeds = ";
    for (std::size_t i = 0; i < sweep_seeds.size(); ++i)
        out += (i ? "," : "") + std::to_string(sweep_seeds[i]);
    out += "\n";
    return out;
}

Graph load_dataset(const ExperimentConfig& cfg, DatasetSummary* summary) {
    DatasetSummary s;
    Graph g;
    if (cfg.source == "files") {
        g = load_graph_csv(cfg.node_file, cfg.edge_file, &s.load);
    } else {
        g = generate_sbm(cfg.sbm);
        s.load.isolated_removed = remove_isolated_nodes(g);
        g.validate();
    }
    s.num_nodes = g.num_nodes;
    s.num_edges = g.num_edges();
    std::tie(s.group0, s.group1) = g.group_counts();
    s.gbs = g.edges.empty() ? 0.0 : edge_group_stats(g).gbs;
    if (summary) *summary = s;
    return g;
}

}  // namespace f2gnn
