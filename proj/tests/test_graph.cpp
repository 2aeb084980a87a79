#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "f2gnn/errors.hpp"
#include "f2gnn/graph.hpp"
#include "f2gnn/rng.hpp"

using namespace f2gnn;

namespace {

Graph make_graph(int n, std::vector<std::pair<int, int>> edges, std::vector<int> sensitive,
                 std::vector<int> labels = {}) {
    Graph g;
    g.num_nodes = n;
    g.edges = std::move(edges);
    canonicalize_edges(g.edges);
    g.sensitive = std::move(sensitive);
    g.labels = labels.empty() ? std::vector<int>(static_cast<std::size_t>(n), 0) : std::move(labels);
    g.features = Eigen::MatrixXd::Zero(n, 2);
    g.validate();
    return g;
}

SbmConfig basic_sbm(int n0, int n1, double p_intra, double p_inter, std::uint64_t seed) {
    SbmConfig cfg;
    cfg.n0 = n0;
    cfg.n1 = n1;
    cfg.p_intra = p_intra;
    cfg.p_inter = p_inter;
    cfg.mean0 = Eigen::VectorXd::Constant(2, 1.0);
    cfg.mean1 = Eigen::VectorXd::Constant(2, -1.0);
    cfg.std0 = Eigen::VectorXd::Constant(2, 1.0);
    cfg.std1 = Eigen::VectorXd::Constant(2, 1.0);
    cfg.label_rule = LabelRule::by_group_with_flip;
    cfg.flip_prob = 0.1;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("edge_group_stats matches the definition on hand-built graphs") {
    // 3 inter + 3 intra: perfectly balanced.
    auto g = make_graph(6, {{0, 1}, {1, 2}, {3, 4}, {0, 3}, {1, 4}, {2, 5}},
                        {0, 0, 0, 1, 1, 1});
    auto st = edge_group_stats(g);
    CHECK(st.n_inter == 3);
    CHECK(st.n_intra == 3);
    CHECK(st.h_intra == doctest::Approx(0.5));
    CHECK(st.gbs == doctest::Approx(1.0));

    // All-intra: maximal imbalance.
    std::vector<std::pair<int, int>> intra_edges;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) intra_edges.emplace_back(i, j);
    auto g2 = make_graph(10, intra_edges, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    auto st2 = edge_group_stats(g2);
    CHECK(st2.n_inter == 0);
    CHECK(st2.h_intra == doctest::Approx(1.0));
    CHECK(st2.gbs == doctest::Approx(0.0));

    // 8 intra + 2 inter: B = 1 - |0.8 - 0.2| = 0.4.
    std::vector<std::pair<int, int>> mixed(intra_edges.begin(), intra_edges.begin() + 8);
    mixed.emplace_back(0, 5);
    mixed.emplace_back(1, 6);
    auto st3 = edge_group_stats(make_graph(10, mixed, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
    CHECK(st3.gbs == doctest::Approx(0.4));
}

TEST_CASE("edge_group_stats rejects an empty edge set") {
    auto g = make_graph(2, {}, {0, 1});
    CHECK_THROWS_AS(edge_group_stats(g), EmptyEdgeSet);
}

TEST_CASE("edge_group_stats is invariant under relabeling and group flips") {
    auto base = generate_sbm(basic_sbm(20, 20, 0.3, 0.1, 5));
    auto st = edge_group_stats(base);

    // Flip every sensitive bit.
    Graph flipped = base;
    for (auto& s : flipped.sensitive) s = 1 - s;
    auto st_flip = edge_group_stats(flipped);
    CHECK(st.n_inter == st_flip.n_inter);
    CHECK(st.gbs == doctest::Approx(st_flip.gbs));

    // Relabel nodes by a seeded permutation.
    std::vector<int> perm(static_cast<std::size_t>(base.num_nodes));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    Rng rng(11);
    rng.shuffle(perm);
    Graph relabeled = base;
    for (int i = 0; i < base.num_nodes; ++i) {
        relabeled.sensitive[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
            base.sensitive[static_cast<std::size_t>(i)];
        relabeled.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
            base.labels[static_cast<std::size_t>(i)];
        relabeled.features.row(perm[static_cast<std::size_t>(i)]) = base.features.row(i);
    }
    relabeled.edges.clear();
    for (const auto& [u, v] : base.edges)
        relabeled.edges.emplace_back(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]);
    canonicalize_edges(relabeled.edges);
    auto st_perm = edge_group_stats(relabeled);
    CHECK(st.n_inter == st_perm.n_inter);
    CHECK(st.n_intra == st_perm.n_intra);
}

TEST_CASE("generate_sbm: complete graph counting") {
    // p_intra = p_inter = 1 on 2+2 nodes gives K4: 2 intra edges, 4 inter.
    auto g = generate_sbm(basic_sbm(2, 2, 1.0, 1.0, 1));
    CHECK(g.num_edges() == 6);
    auto st = edge_group_stats(g);
    CHECK(st.n_intra == 2);
    CHECK(st.n_inter == 4);
    CHECK(st.gbs == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("generate_sbm: no inter edges when p_inter = 0") {
    auto g = generate_sbm(basic_sbm(30, 30, 0.3, 0.0, 2));
    auto st = edge_group_stats(g);
    CHECK(st.n_inter == 0);
    CHECK(st.h_intra == doctest::Approx(1.0));
    CHECK(st.gbs == doctest::Approx(0.0));
}

TEST_CASE("generate_sbm: equal probabilities give a near-balanced edge mix") {
    // E[h_intra - h_inter] ~ 0 up to the O(1/N) pair-count correction.
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto g = generate_sbm(basic_sbm(500, 500, 0.02, 0.02, seed));
        auto st = edge_group_stats(g);
        CHECK(std::abs(st.h_intra - st.h_inter) < 0.05);
    }
}

TEST_CASE("generate_sbm: raising p_inter raises the expected inter fraction") {
    double last_mean = -1.0;
    for (double p_inter : {0.005, 0.02, 0.05}) {
        double mean = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto cfg = basic_sbm(200, 200, 0.05, p_inter, seed);
            mean += edge_group_stats(generate_sbm(cfg)).h_inter;
        }
        mean /= 5.0;
        CHECK(mean > last_mean);
        last_mean = mean;
    }
}

TEST_CASE("generate_sbm is deterministic and validates") {
    auto cfg = basic_sbm(50, 30, 0.2, 0.05, 99);
    auto a = generate_sbm(cfg);
    auto b = generate_sbm(cfg);
    a.validate();
    CHECK(a.edges == b.edges);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    auto [n0, n1] = a.group_counts();
    CHECK(n0 == 50);
    CHECK(n1 == 30);
}

TEST_CASE("generate_sbm label rules") {
    auto cfg = basic_sbm(200, 200, 0.05, 0.05, 3);
    cfg.flip_prob = 0.0;
    auto g = generate_sbm(cfg);
    CHECK(g.labels == g.sensitive);  // no flips

    cfg.flip_prob = 0.25;
    cfg.seed = 4;
    auto g2 = generate_sbm(cfg);
    int flips = 0;
    for (int i = 0; i < g2.num_nodes; ++i)
        flips += g2.labels[static_cast<std::size_t>(i)] != g2.sensitive[static_cast<std::size_t>(i)];
    CHECK(flips > 50);
    CHECK(flips < 150);

    cfg.label_rule = LabelRule::by_feature_threshold;
    auto g3 = generate_sbm(cfg);
    const double pooled = g3.features.col(0).mean();
    for (int i = 0; i < g3.num_nodes; ++i)
        CHECK(g3.labels[static_cast<std::size_t>(i)] == (g3.features(i, 0) > pooled ? 1 : 0));
}

TEST_CASE("ego_network on a star and a path") {
    // Star: center 0, leaves 1..5.
    auto star = make_graph(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}}, {0, 1, 0, 1, 0, 1});
    auto around_center = ego_network(star, 0, 1);
    CHECK(around_center.graph.num_nodes == 6);
    CHECK(around_center.graph.num_edges() == 5);
    CHECK(around_center.center == 0);

    auto around_leaf = ego_network(star, 3, 1);
    CHECK(around_leaf.graph.num_nodes == 2);
    CHECK(around_leaf.global_ids == std::vector<int>{0, 3});

    // Path a-b-c-d.
    auto path = make_graph(4, {{0, 1}, {1, 2}, {2, 3}}, {0, 0, 1, 1});
    auto ball = ego_network(path, 0, 1);
    CHECK(ball.global_ids == std::vector<int>{0, 1});
    CHECK(ball.graph.num_edges() == 1);
    auto ball2 = ego_network(path, 0, 2);
    CHECK(ball2.global_ids == std::vector<int>{0, 1, 2});
}

namespace {

// Independent hop-limited reachability: plain distance relaxation over edges.
std::set<int> reachable_within(const Graph& g, int center, int hops) {
    std::vector<int> dist(static_cast<std::size_t>(g.num_nodes), 1 << 20);
    dist[static_cast<std::size_t>(center)] = 0;
    for (int round = 0; round < hops; ++round) {
        auto next = dist;
        for (const auto& [u, v] : g.edges) {
            next[static_cast<std::size_t>(v)] =
                std::min(next[static_cast<std::size_t>(v)], dist[static_cast<std::size_t>(u)] + 1);
            next[static_cast<std::size_t>(u)] =
                std::min(next[static_cast<std::size_t>(u)], dist[static_cast<std::size_t>(v)] + 1);
        }
        dist = next;
    }
    std::set<int> out;
    for (int i = 0; i < g.num_nodes; ++i)
        if (dist[static_cast<std::size_t>(i)] <= hops) out.insert(i);
    return out;
}

}  // namespace

TEST_CASE("partition_ego_networks matches an independent reachability oracle") {
    auto g = generate_sbm(basic_sbm(50, 50, 0.05, 0.02, 21));
    auto clients = partition_ego_networks(g, 5, 2, 7);
    REQUIRE(clients.size() == 5);
    std::set<int> union_nodes;
    for (const auto& c : clients) {
        const auto expect = reachable_within(g, c.center, 2);
        std::set<int> got(c.global_ids.begin(), c.global_ids.end());
        CHECK(got == expect);
        CHECK(got.count(c.center) == 1);
        union_nodes.insert(got.begin(), got.end());

        // Local attributes mirror the global ones.
        for (std::size_t i = 0; i < c.global_ids.size(); ++i) {
            const auto gid = static_cast<std::size_t>(c.global_ids[i]);
            CHECK(c.graph.sensitive[i] == g.sensitive[gid]);
            CHECK(c.graph.labels[i] == g.labels[gid]);
        }
        c.graph.validate();
    }
    CHECK(static_cast<int>(union_nodes.size()) <= g.num_nodes);

    // Bit-identical under the same seed.
    auto again = partition_ego_networks(g, 5, 2, 7);
    for (std::size_t i = 0; i < clients.size(); ++i) {
        CHECK(clients[i].center == again[i].center);
        CHECK(clients[i].global_ids == again[i].global_ids);
        CHECK(clients[i].graph.edges == again[i].graph.edges);
    }
}

TEST_CASE("partition_ego_networks error paths") {
    auto g = make_graph(3, {{0, 1}}, {0, 1, 0});
    CHECK_THROWS_AS(partition_ego_networks(g, 4, 1, 1), InsufficientNodes);

    // No edges anywhere: every candidate ego-network is empty.
    auto isolated = make_graph(5, {}, {0, 1, 0, 1, 0});
    CHECK_THROWS_AS(partition_ego_networks(isolated, 2, 1, 1), EmptyClient);
}

TEST_CASE("remove_isolated_nodes compacts ids") {
    auto g = make_graph(5, {{1, 3}}, {0, 1, 0, 1, 0}, {1, 0, 1, 0, 1});
    g.features.col(0) << 10, 11, 12, 13, 14;
    CHECK(remove_isolated_nodes(g) == 3);
    CHECK(g.num_nodes == 2);
    CHECK(g.edges == std::vector<std::pair<int, int>>{{0, 1}});
    CHECK(g.features(0, 0) == 11);
    CHECK(g.features(1, 0) == 13);
    CHECK(g.sensitive == std::vector<int>{1, 1});
    g.validate();
}

TEST_CASE("CSV round trip with deduplication and self-loop rejection") {
    const std::string nodes = "/tmp/f2gnn_test_nodes.csv";
    const std::string edges = "/tmp/f2gnn_test_edges.csv";
    {
        std::ofstream n(nodes);
        n << "node_id,sensitive,label,f1,f2\n";
        n << "0,0,1,0.5,-1\n1,1,0,0.25,2\n2,0,0,1.5,0\n3,1,1,-0.5,1\n";
        std::ofstream e(edges);
        e << "src,dst\n0,1\n1,0\n2,3\n3,3\n1,2\n";
    }
    LoadStats stats;
    auto g = load_graph_csv(nodes, edges, &stats);
    CHECK(g.num_nodes == 4);
    CHECK(g.num_edges() == 3);  // 0-1 deduplicated, 3-3 rejected
    CHECK(stats.duplicate_edges == 1);
    CHECK(stats.self_loops_rejected == 1);
    CHECK(stats.isolated_removed == 0);
    CHECK(g.features(0, 1) == doctest::Approx(-1.0));

    save_graph_csv(g, nodes, edges);
    auto g2 = load_graph_csv(nodes, edges);
    CHECK(g2.edges == g.edges);
    CHECK(g2.features == g.features);
}

TEST_CASE("CSV loader rejects malformed input") {
    const std::string nodes = "/tmp/f2gnn_bad_nodes.csv";
    const std::string edges = "/tmp/f2gnn_bad_edges.csv";
    {
        std::ofstream n(nodes);
        n << "node_id,sensitive,label,f1\n0,2,1,0.5\n";
        std::ofstream e(edges);
        e << "src,dst\n";
    }
    CHECK_THROWS_AS(load_graph_csv(nodes, edges), BinaryViolation);
    {
        std::ofstream n(nodes);
        n << "node_id,sensitive,label,f1\n5,0,1,0.5\n";
    }
    CHECK_THROWS_AS(load_graph_csv(nodes, edges), FormatError);
    {
        std::ofstream n(nodes);
        n << "node_id,sensitive,label,f1\n0,0,1,0.5\n1,1,0,0.25\n";
        std::ofstream e(edges);
        e << "src,dst\n0,7\n";
    }
    CHECK_THROWS_AS(load_graph_csv(nodes, edges), FormatError);
}
