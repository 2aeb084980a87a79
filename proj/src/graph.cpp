#include "f2gnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

#include "f2gnn/errors.hpp"
#include "f2gnn/rng.hpp"

namespace f2gnn {

void canonicalize_edges(std::vector<std::pair<int, int>>& edges) {
    for (auto& [u, v] : edges) {
        if (u == v) throw GraphError("self-loop (" + std::to_string(u) + ") is not storable");
        if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

void Graph::validate() const {
    if (num_nodes < 0) throw GraphError("negative node count");
    if (static_cast<int>(sensitive.size()) != num_nodes ||
        static_cast<int>(labels.size()) != num_nodes ||
        features.rows() != num_nodes) {
        throw GraphError("node attribute arrays do not match num_nodes");
    }
    for (int i = 0; i < num_nodes; ++i) {
        if (sensitive[i] != 0 && sensitive[i] != 1)
            throw GraphError("sensitive attribute not binary at node " + std::to_string(i));
        if (labels[i] != 0 && labels[i] != 1)
            throw GraphError("label not binary at node " + std::to_string(i));
    }
    if (!features.allFinite()) throw GraphError("non-finite feature value");
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto [u, v] = edges[k];
        if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
            throw GraphError("edge endpoint out of range at edge " + std::to_string(k));
        if (u == v) throw GraphError("stored self-loop at edge " + std::to_string(k));
        if (u > v) throw GraphError("non-canonical edge order at edge " + std::to_string(k));
        if (k > 0 && edges[k] == edges[k - 1])
            throw GraphError("duplicate edge at index " + std::to_string(k));
    }
}

std::vector<std::vector<int>> Graph::adjacency_list() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
    for (const auto& [u, v] : edges) {
        adj[static_cast<std::size_t>(u)].push_back(v);
        adj[static_cast<std::size_t>(v)].push_back(u);
    }
    return adj;
}

std::pair<int, int> Graph::group_counts() const {
    int n1 = 0;
    for (int s : sensitive) n1 += s;
    return {num_nodes - n1, n1};
}

EdgeGroupStats edge_group_stats(const Graph& g) {
    if (g.edges.empty()) throw EmptyEdgeSet("group balance score undefined on an empty edge set");
    EdgeGroupStats st;
    for (const auto& [u, v] : g.edges) {
        if (g.sensitive[static_cast<std::size_t>(u)] != g.sensitive[static_cast<std::size_t>(v)])
            ++st.n_inter;
        else
            ++st.n_intra;
    }
    const double total = static_cast<double>(st.n_inter + st.n_intra);
    st.h_inter = static_cast<double>(st.n_inter) / total;
    st.h_intra = static_cast<double>(st.n_intra) / total;
    st.gbs = 1.0 - std::abs(st.h_intra - st.h_inter);
    return st;
}

void SbmConfig::validate() const {
    if (n0 < 1 || n1 < 1) throw ValidationError("sbm: both groups need at least one node");
    if (p_intra < 0.0 || p_intra > 1.0 || p_inter < 0.0 || p_inter > 1.0)
        throw ValidationError("sbm: edge probabilities must lie in [0,1]");
    const auto d = mean0.size();
    if (d == 0) throw ValidationError("sbm: feature dimension must be positive");
    if (mean1.size() != d || std0.size() != d || std1.size() != d)
        throw ValidationError("sbm: mean/std vectors must share one length");
    if ((std0.array() <= 0.0).any() || (std1.array() <= 0.0).any())
        throw ValidationError("sbm: feature stds must be positive");
    if (label_rule == LabelRule::by_group_with_flip && (flip_prob < 0.0 || flip_prob > 1.0))
        throw ValidationError("sbm: flip probability must lie in [0,1]");
}

Graph generate_sbm(const SbmConfig& cfg) {
    cfg.validate();
    const int n = cfg.n0 + cfg.n1;
    const int d = cfg.feature_dim();

    Graph g;
    g.num_nodes = n;
    g.sensitive.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g.sensitive[static_cast<std::size_t>(i)] = i < cfg.n0 ? 0 : 1;

    Rng base(cfg.seed);
    Rng edge_rng = base.child(1);
    Rng feat_rng = base.child(2);
    Rng label_rng = base.child(3);

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double p =
                g.sensitive[static_cast<std::size_t>(i)] == g.sensitive[static_cast<std::size_t>(j)]
                    ? cfg.p_intra
                    : cfg.p_inter;
            if (p > 0.0 && edge_rng.bernoulli(p)) g.edges.emplace_back(i, j);
        }
    }

    g.features.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const bool grp1 = g.sensitive[static_cast<std::size_t>(i)] == 1;
        const auto& mu = grp1 ? cfg.mean1 : cfg.mean0;
        const auto& sd = grp1 ? cfg.std1 : cfg.std0;
        for (int j = 0; j < d; ++j) g.features(i, j) = mu(j) + sd(j) * feat_rng.normal();
    }

    g.labels.resize(static_cast<std::size_t>(n));
    if (cfg.label_rule == LabelRule::by_group_with_flip) {
        for (int i = 0; i < n; ++i) {
            const int flip = label_rng.bernoulli(cfg.flip_prob) ? 1 : 0;
            g.labels[static_cast<std::size_t>(i)] = g.sensitive[static_cast<std::size_t>(i)] ^ flip;
        }
    } else {
        const double pooled_mean = g.features.col(0).mean();
        for (int i = 0; i < n; ++i)
            g.labels[static_cast<std::size_t>(i)] = g.features(i, 0) > pooled_mean ? 1 : 0;
    }
    return g;
}

namespace {

ClientGraph bfs_ego_network(const Graph& g, const std::vector<std::vector<int>>& adj,
                            int center, int hops) {
    std::vector<int> dist(static_cast<std::size_t>(g.num_nodes), -1);
    std::deque<int> queue{center};
    dist[static_cast<std::size_t>(center)] = 0;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        if (dist[static_cast<std::size_t>(u)] == hops) continue;
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (dist[static_cast<std::size_t>(v)] < 0) {
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                queue.push_back(v);
            }
        }
    }

    ClientGraph client;
    client.center = center;
    for (int v = 0; v < g.num_nodes; ++v)
        if (dist[static_cast<std::size_t>(v)] >= 0) client.global_ids.push_back(v);

    std::vector<int> local(static_cast<std::size_t>(g.num_nodes), -1);
    for (std::size_t i = 0; i < client.global_ids.size(); ++i)
        local[static_cast<std::size_t>(client.global_ids[i])] = static_cast<int>(i);

    Graph& sub = client.graph;
    sub.num_nodes = static_cast<int>(client.global_ids.size());
    sub.features.resize(sub.num_nodes, g.feature_dim());
    sub.sensitive.resize(static_cast<std::size_t>(sub.num_nodes));
    sub.labels.resize(static_cast<std::size_t>(sub.num_nodes));
    for (int i = 0; i < sub.num_nodes; ++i) {
        const int gid = client.global_ids[static_cast<std::size_t>(i)];
        sub.features.row(i) = g.features.row(gid);
        sub.sensitive[static_cast<std::size_t>(i)] = g.sensitive[static_cast<std::size_t>(gid)];
        sub.labels[static_cast<std::size_t>(i)] = g.labels[static_cast<std::size_t>(gid)];
    }
    for (const auto& [u, v] : g.edges) {
        const int lu = local[static_cast<std::size_t>(u)];
        const int lv = local[static_cast<std::size_t>(v)];
        if (lu >= 0 && lv >= 0) sub.edges.emplace_back(std::min(lu, lv), std::max(lu, lv));
    }
    std::sort(sub.edges.begin(), sub.edges.end());
    return client;
}

}  // namespace

ClientGraph ego_network(const Graph& g, int center, int hops) {
    if (center < 0 || center >= g.num_nodes) throw ValidationError("ego center out of range");
    if (hops < 1) throw ValidationError("hops must be >= 1");
    return bfs_ego_network(g, g.adjacency_list(), center, hops);
}

std::vector<ClientGraph> partition_ego_networks(const Graph& g, int k_clients, int hops,
                                                std::uint64_t seed) {
    if (k_clients < 1) throw ValidationError("k_clients must be >= 1");
    if (hops < 1) throw ValidationError("hops must be >= 1");
    if (k_clients > g.num_nodes)
        throw InsufficientNodes("cannot place " + std::to_string(k_clients) + " clients on " +
                                std::to_string(g.num_nodes) + " nodes");

    const auto adj = g.adjacency_list();
    Rng rng(seed);
    std::vector<int> order(static_cast<std::size_t>(g.num_nodes));
    for (int i = 0; i < g.num_nodes; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);

    // Walk the shuffled node list, skipping centers whose ego-network has no
    // edges; bounded so a pathological graph still fails loudly.
    constexpr int kMaxRetries = 64;
    std::vector<ClientGraph> clients;
    int retries = 0;
    std::size_t cursor = 0;
    while (static_cast<int>(clients.size()) < k_clients) {
        if (cursor >= order.size() || retries > kMaxRetries)
            throw EmptyClient("could not find " + std::to_string(k_clients) +
                              " ego-networks with at least one edge");
        const int center = order[cursor++];
        ClientGraph client = bfs_ego_network(g, adj, center, hops);
        if (client.graph.edges.empty()) {
            ++retries;
            continue;
        }
        clients.push_back(std::move(client));
    }
    return clients;
}

int remove_isolated_nodes(Graph& g) {
    std::vector<char> has_edge(static_cast<std::size_t>(g.num_nodes), 0);
    for (const auto& [u, v] : g.edges) {
        has_edge[static_cast<std::size_t>(u)] = 1;
        has_edge[static_cast<std::size_t>(v)] = 1;
    }
    std::vector<int> remap(static_cast<std::size_t>(g.num_nodes), -1);
    int kept = 0;
    for (int i = 0; i < g.num_nodes; ++i)
        if (has_edge[static_cast<std::size_t>(i)]) remap[static_cast<std::size_t>(i)] = kept++;
    const int removed = g.num_nodes - kept;
    if (removed == 0) return 0;

    Eigen::MatrixXd features(kept, g.feature_dim());
    std::vector<int> sensitive(static_cast<std::size_t>(kept));
    std::vector<int> labels(static_cast<std::size_t>(kept));
    for (int i = 0; i < g.num_nodes; ++i) {
        const int j = remap[static_cast<std::size_t>(i)];
        if (j < 0) continue;
        features.row(j) = g.features.row(i);
        sensitive[static_cast<std::size_t>(j)] = g.sensitive[static_cast<std::size_t>(i)];
        labels[static_cast<std::size_t>(j)] = g.labels[static_cast<std::size_t>(i)];
    }
    for (auto& [u, v] : g.edges) {
        u = remap[static_cast<std::size_t>(u)];
        v = remap[static_cast<std::size_t>(v)];
    }
    g.num_nodes = kept;
    g.features = std::move(features);
    g.sensitive = std::move(sensitive);
    g.labels = std::move(labels);
    return removed;
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

int parse_binary(const std::string& text, const char* what, int row) {
    if (text == "0") return 0;
    if (text == "1") return 1;
    throw BinaryViolation(std::string(what) + " must be 0 or 1, got '" + text + "' at row " +
                          std::to_string(row));
}

double parse_double_field(const std::string& text, int row) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw FormatError("bad numeric field '" + text + "' at row " + std::to_string(row));
    }
}

}  // namespace

Graph load_graph_csv(const std::string& node_path, const std::string& edge_path,
                     LoadStats* stats) {
    std::ifstream nodes(node_path);
    if (!nodes) throw IoError("cannot open node file: " + node_path);
    std::ifstream edges(edge_path);
    if (!edges) throw IoError("cannot open edge file: " + edge_path);

    LoadStats st;
    std::string line;
    if (!std::getline(nodes, line)) throw FormatError("node file is empty: " + node_path);
    const auto header = split_csv_row(line);
    if (header.size() < 4 || header[0] != "node_id" || header[1] != "sensitive" ||
        header[2] != "label")
        throw FormatError("node file header must start with node_id,sensitive,label,f1,...");
    const int d = static_cast<int>(header.size()) - 3;

    Graph g;
    std::vector<std::vector<double>> feature_rows;
    int row = 1;
    while (std::getline(nodes, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_row(line);
        if (static_cast<int>(fields.size()) != d + 3)
            throw FormatError("node row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(d + 3));
        const int id = static_cast<int>(parse_double_field(fields[0], row));
        if (id != static_cast<int>(feature_rows.size()))
            throw FormatError("node ids must be contiguous from 0; got " + std::to_string(id) +
                              " at row " + std::to_string(row));
        g.sensitive.push_back(parse_binary(fields[1], "sensitive", row));
        g.labels.push_back(parse_binary(fields[2], "label", row));
        std::vector<double> feats(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j)
            feats[static_cast<std::size_t>(j)] = parse_double_field(fields[static_cast<std::size_t>(j + 3)], row);
        feature_rows.push_back(std::move(feats));
    }
    g.num_nodes = static_cast<int>(feature_rows.size());
    if (g.num_nodes == 0) throw FormatError("node file has no data rows: " + node_path);
    g.features.resize(g.num_nodes, d);
    for (int i = 0; i < g.num_nodes; ++i)
        for (int j = 0; j < d; ++j)
            g.features(i, j) = feature_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

    if (!std::getline(edges, line)) throw FormatError("edge file is empty: " + edge_path);
    if (split_csv_row(line) != std::vector<std::string>{"src", "dst"})
        throw FormatError("edge file header must be src,dst");
    row = 1;
    std::size_t raw_rows = 0;
    while (std::getline(edges, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_row(line);
        if (fields.size() != 2)
            throw FormatError("edge row " + std::to_string(row) + " must have 2 fields");
        const int u = static_cast<int>(parse_double_field(fields[0], row));
        const int v = static_cast<int>(parse_double_field(fields[1], row));
        if (u < 0 || v < 0 || u >= g.num_nodes || v >= g.num_nodes)
            throw FormatError("edge endpoint out of range at row " + std::to_string(row));
        if (u == v) {
            ++st.self_loops_rejected;
            continue;
        }
        ++raw_rows;
        g.edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    st.duplicate_edges = static_cast<int>(raw_rows - g.edges.size());
    st.isolated_removed = remove_isolated_nodes(g);
    g.validate();
    if (stats) *stats = st;
    return g;
}

void save_graph_csv(const Graph& g, const std::string& node_path, const std::string& edge_path) {
    std::ofstream nodes(node_path);
    if (!nodes) throw IoError("cannot write node file: " + node_path);
    nodes << "node_id,sensitive,label";
    for (int j = 0; j < g.feature_dim(); ++j) nodes << ",f" << (j + 1);
    nodes << "\n";
    char buf[64];
    for (int i = 0; i < g.num_nodes; ++i) {
        nodes << i << ',' << g.sensitive[static_cast<std::size_t>(i)] << ','
              << g.labels[static_cast<std::size_t>(i)];
        for (int j = 0; j < g.feature_dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", g.features(i, j));
            nodes << ',' << buf;
        }
        nodes << "\n";
    }
    std::ofstream edges(edge_path);
    if (!edges) throw IoError("cannot write edge file: " + edge_path);
    edges << "src,dst\n";
    for (const auto& [u, v] : g.edges) edges << u << ',' << v << "\n";
}

}  // namespace f2gnn
