#include <doctest.h>

#include <cmath>

#include "f2gnn/errors.hpp"
#include "f2gnn/federation.hpp"
#include "f2gnn/rng.hpp"

using namespace f2gnn;

namespace {

Graph fixture_graph(std::uint64_t seed = 3, int n_per_group = 60) {
    SbmConfig cfg;
    cfg.n0 = n_per_group;
    cfg.n1 = n_per_group;
    cfg.p_intra = 0.10;
    cfg.p_inter = 0.02;
    cfg.mean0 = Eigen::VectorXd::Constant(3, 0.6);
    cfg.mean1 = Eigen::VectorXd::Constant(3, -0.6);
    cfg.std0 = Eigen::VectorXd::Constant(3, 1.0);
    cfg.std1 = Eigen::VectorXd::Constant(3, 1.0);
    cfg.label_rule = LabelRule::by_group_with_flip;
    cfg.flip_prob = 0.2;
    cfg.seed = seed;
    auto g = generate_sbm(cfg);
    remove_isolated_nodes(g);
    return g;
}

struct Fixture {
    Graph graph;
    NormalizedAdjacency adj;
    SplitMasks masks;
    std::vector<ClientState> clients;

    explicit Fixture(int k_clients, std::uint64_t seed = 3)
        : graph(fixture_graph(seed)),
          adj(graph),
          masks(split_nodes(graph.num_nodes, 0.5, 0.25, 0.25, 17)) {
        clients = make_clients(partition_ego_networks(graph, k_clients, 2, 5), masks);
    }

    EvalContext eval() const { return EvalContext{graph, adj, masks.test, masks.val}; }
};

FedHyper small_hyper() {
    FedHyper h;
    h.learning_rate = 0.05;
    h.alpha = 1.0;
    h.lambda = 2.0;
    h.tau = 1.0;
    h.local_epochs = 2;
    h.rounds = 4;
    h.hidden_dim = 4;
    h.server_seed = 11;
    return h;
}

ClientUpload upload_with(int id, double gbs, double dsp, double deo) {
    ClientUpload u;
    u.client_id = id;
    u.params.w1 = Eigen::MatrixXd::Zero(1, 1);
    u.params.w2 = Eigen::VectorXd::Zero(1);
    u.gbs = gbs;
    u.delta_sp = dsp;
    u.delta_eo = deo;
    u.fair_loss = dsp + deo;
    return u;
}

}  // namespace

TEST_CASE("split_nodes produces disjoint masks with the configured sizes") {
    auto m = split_nodes(100, 0.5, 0.25, 0.25, 7);
    int tr = 0, va = 0, te = 0;
    for (int i = 0; i < 100; ++i) {
        tr += m.train[static_cast<std::size_t>(i)];
        va += m.val[static_cast<std::size_t>(i)];
        te += m.test[static_cast<std::size_t>(i)];
        CHECK(m.train[static_cast<std::size_t>(i)] + m.val[static_cast<std::size_t>(i)] +
                  m.test[static_cast<std::size_t>(i)] ==
              1);
    }
    CHECK(tr == 50);
    CHECK(va == 25);
    CHECK(te == 25);
    CHECK_THROWS_AS(split_nodes(10, 0.5, 0.3, 0.3, 1), ValidationError);
}

TEST_CASE("client interpolation boundaries via the js hook") {
    Fixture fx(3);
    FedHyper h = small_hyper();
    h.local_epochs = 0;  // isolate the interpolation step

    auto global = glorot_init(fx.graph.feature_dim(), h.hidden_dim, 1);
    auto& client = fx.clients[0];

    // Identical models: js = 0, initialization unchanged.
    client.params = global;
    auto up = client_local_update(client, global, h);
    CHECK(up.js == 0.0);
    CHECK((up.params.w1 - global.w1).cwiseAbs().maxCoeff() == 0.0);

    // Forced js = 1: initialization is exactly the broadcast model.
    client.params = glorot_init(fx.graph.feature_dim(), h.hidden_dim, 2);
    h.js_override = 1.0;
    up = client_local_update(client, global, h);
    CHECK(up.js == 1.0);
    CHECK((up.params.w1 - global.w1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((up.params.w2 - global.w2).cwiseAbs().maxCoeff() == 0.0);

    // Forced js = 0.5 on 0-vector local and 2-vector global: midpoint 1.
    ModelParams zeros, twos;
    zeros.w1 = Eigen::MatrixXd::Zero(fx.graph.feature_dim(), h.hidden_dim);
    zeros.w2 = Eigen::VectorXd::Zero(h.hidden_dim);
    twos.w1 = Eigen::MatrixXd::Constant(fx.graph.feature_dim(), h.hidden_dim, 2.0);
    twos.w2 = Eigen::VectorXd::Constant(h.hidden_dim, 2.0);
    client.params = zeros;
    h.js_override = 0.5;
    up = client_local_update(client, twos, h);
    CHECK((up.params.w1.array() - 1.0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((up.params.w2.array() - 1.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interpolation is coordinatewise convex") {
    Fixture fx(2);
    FedHyper h = small_hyper();
    h.local_epochs = 0;
    h.js_override = 0.37;
    auto global = glorot_init(fx.graph.feature_dim(), h.hidden_dim, 4);
    auto local = glorot_init(fx.graph.feature_dim(), h.hidden_dim, 5);
    fx.clients[0].params = local;
    auto up = client_local_update(fx.clients[0], global, h);
    for (int i = 0; i < up.params.w1.rows(); ++i)
        for (int j = 0; j < up.params.w1.cols(); ++j) {
            const double lo = std::min(local.w1(i, j), global.w1(i, j));
            const double hi = std::max(local.w1(i, j), global.w1(i, j));
            CHECK(up.params.w1(i, j) >= lo);
            CHECK(up.params.w1(i, j) <= hi);
        }
}

TEST_CASE("server weights: symmetric inputs give the uniform vector") {
    std::vector<ClientUpload> ups{upload_with(0, 0.4, 0.1, 0.2), upload_with(1, 0.4, 0.1, 0.2)};
    auto w = server_combined_weights(ups, 2.0, 1.0);
    CHECK(w.gamma(0) == doctest::Approx(0.5));
    CHECK(w.gamma(1) == doctest::Approx(0.5));

    // lambda = 0 with equal fairness sums: uniform regardless of the B's.
    std::vector<ClientUpload> ups2{upload_with(0, 0.9, 0.15, 0.05), upload_with(1, 0.1, 0.05, 0.15)};
    auto w2 = server_combined_weights(ups2, 0.0, 1.0);
    CHECK(w2.gamma(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w2.gamma(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("server weights match a step-by-step arithmetic oracle") {
    // K'=3, B=(0.2,0.5,0.9), fairness sums=(0.3,0.1,0.2), lambda=2, tau=0.5.
    std::vector<ClientUpload> ups{upload_with(0, 0.2, 0.2, 0.1), upload_with(1, 0.5, 0.05, 0.05),
                                  upload_with(2, 0.9, 0.15, 0.05)};
    auto w = server_combined_weights(ups, 2.0, 0.5);

    auto softmax3 = [](double a, double b, double c, int idx) {
        const double m = std::max({a, b, c});
        const double ea = std::exp(a - m), eb = std::exp(b - m), ec = std::exp(c - m);
        const double z = ea + eb + ec;
        return (idx == 0 ? ea : idx == 1 ? eb : ec) / z;
    };
    double ge[3], gf[3], gamma[3];
    for (int i = 0; i < 3; ++i) ge[i] = softmax3(0.2, 0.5, 0.9, i);
    for (int i = 0; i < 3; ++i) gf[i] = std::exp(softmax3(0.3, 0.1, 0.2, i));
    double combo[3];
    for (int i = 0; i < 3; ++i) combo[i] = (2.0 * ge[i] + gf[i]) / 0.5;
    for (int i = 0; i < 3; ++i) gamma[i] = softmax3(combo[0], combo[1], combo[2], i);
    for (int i = 0; i < 3; ++i) {
        CHECK(w.gamma_e(i) == doctest::Approx(ge[i]).epsilon(1e-12));
        CHECK(w.gamma_f(i) == doctest::Approx(gf[i]).epsilon(1e-12));
        CHECK(w.gamma(i) == doctest::Approx(gamma[i]).epsilon(1e-12));
        CHECK(w.gamma_f(i) > 1.0);
        CHECK(w.gamma_f(i) < std::exp(1.0));
    }
}

TEST_CASE("less fair clients get more weight literally, less when inverted") {
    std::vector<ClientUpload> ups{upload_with(0, 0.5, 0.30, 0.30), upload_with(1, 0.5, 0.05, 0.05)};
    auto literal = server_combined_weights(ups, 0.0, 1.0, false);
    CHECK(literal.gamma(0) > literal.gamma(1));
    auto inverted = server_combined_weights(ups, 0.0, 1.0, true);
    CHECK(inverted.gamma(0) < inverted.gamma(1));
}

TEST_CASE("extreme temperature flattens the combined weights") {
    std::vector<ClientUpload> ups{upload_with(0, 0.9, 0.4, 0.3), upload_with(1, 0.2, 0.0, 0.1),
                                  upload_with(2, 0.5, 0.2, 0.2)};
    auto w = server_combined_weights(ups, 2.0, 1e6);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(w.gamma(i) - 1.0 / 3.0) < 1e-6);
}

TEST_CASE("server_aggregate convex combinations") {
    auto a = upload_with(0, 0.5, 0.0, 0.0);
    auto b = upload_with(1, 0.5, 0.0, 0.0);
    a.params.w1 = Eigen::MatrixXd::Zero(2, 2);
    a.params.w2 = Eigen::VectorXd::Zero(2);
    b.params.w1 = Eigen::MatrixXd::Constant(2, 2, 4.0);
    b.params.w2 = Eigen::VectorXd::Constant(2, 4.0);

    Eigen::VectorXd just_one(1);
    just_one << 1.0;
    auto only = server_aggregate({a}, just_one);
    CHECK((only.w1 - a.params.w1).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd weights(2);
    weights << 0.25, 0.75;
    auto mixed = server_aggregate({a, b}, weights);
    CHECK(mixed.w1(0, 0) == doctest::Approx(3.0));
    CHECK(mixed.w2(1) == doctest::Approx(3.0));

    // Identical params are a fixed point.
    b.params = a.params;
    auto same = server_aggregate({a, b}, weights);
    CHECK((same.w1 - a.params.w1).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd wrong(3);
    wrong << 0.2, 0.3, 0.5;
    CHECK_THROWS_AS(server_aggregate({a, b}, wrong), ShapeMismatch);
}

TEST_CASE("run_federation with zero rounds changes nothing") {
    Fixture fx(3);
    ServerState server;
    server.hyper = small_hyper();
    server.hyper.rounds = 0;
    server.params = glorot_init(fx.graph.feature_dim(), server.hyper.hidden_dim, 9);
    const auto before = server.params;
    auto result = run_federation(server, fx.clients, fx.eval());
    CHECK(result.rounds.empty());
    CHECK((result.final_params.w1 - before.w1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single client federation equals a standalone training loop") {
    Fixture fx(1);
    ServerState server;
    server.hyper = small_hyper();
    server.hyper.rounds = 5;
    server.hyper.clients_per_round = 1;
    server.params = glorot_init(fx.graph.feature_dim(), server.hyper.hidden_dim, 13);

    // Standalone oracle: same init, fresh Adam per round, same epoch count.
    // With one client the broadcast equals the client's own parameters, so
    // the JS coefficient is 0 and interpolation is the identity.
    const auto& c = fx.clients[0];
    ModelParams params = server.params;
    for (int round = 0; round < 5; ++round) {
        AdamState adam(server.hyper.learning_rate, params.input_dim(), params.hidden_dim());
        for (int e = 0; e < server.hyper.local_epochs; ++e) {
            auto res = loss_and_grad(params, c.adj, c.graph.features, c.graph.labels,
                                     c.graph.sensitive, c.train_mask, server.hyper.alpha,
                                     server.hyper.activation);
            params = adam_step(adam, params, res.grads);
        }
    }

    auto result = run_federation(server, fx.clients, fx.eval());
    REQUIRE(result.rounds.size() == 5);
    for (const auto& r : result.rounds) {
        CHECK(r.weights.gamma.size() == 1);
        CHECK(r.weights.gamma(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.uploads[0].js == 0.0);
    }
    CHECK((result.final_params.w1 - params.w1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((result.final_params.w2 - params.w2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("degenerate configuration reproduces plain FedAvg") {
    Fixture fx(4);
    ServerState server;
    server.hyper = small_hyper();
    server.hyper.rounds = 4;
    server.hyper.clients_per_round = 3;
    server.hyper.alpha = 0.0;
    server.hyper.lambda = 0.0;
    server.hyper.uniform_weights = true;
    server.hyper.js_override = 1.0;  // local init = broadcast, as in FedAvg
    server.params = glorot_init(fx.graph.feature_dim(), server.hyper.hidden_dim, 21);
    const auto init = server.params;

    auto result = run_federation(server, fx.clients, fx.eval());

    // Independent FedAvg reference over the recorded client sample sequence.
    ModelParams global = init;
    for (const auto& round : result.rounds) {
        std::vector<ModelParams> locals;
        for (int id : round.selected) {
            const auto& c = fx.clients[static_cast<std::size_t>(id)];
            ModelParams p = global;
            AdamState adam(server.hyper.learning_rate, p.input_dim(), p.hidden_dim());
            for (int e = 0; e < server.hyper.local_epochs; ++e) {
                auto res = loss_and_grad(p, c.adj, c.graph.features, c.graph.labels,
                                         c.graph.sensitive, c.train_mask, 0.0,
                                         server.hyper.activation);
                p = adam_step(adam, p, res.grads);
            }
            locals.push_back(std::move(p));
        }
        ModelParams avg;
        avg.w1 = Eigen::MatrixXd::Zero(global.w1.rows(), global.w1.cols());
        avg.w2 = Eigen::VectorXd::Zero(global.w2.size());
        for (const auto& p : locals) {
            avg.w1 += p.w1 / static_cast<double>(locals.size());
            avg.w2 += p.w2 / static_cast<double>(locals.size());
        }
        global = std::move(avg);
    }
    CHECK((result.final_params.w1 - global.w1).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((result.final_params.w2 - global.w2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("run_fedavg_baseline matches the degenerate federation configuration") {
    Fixture fx(3);
    auto run_once = [&](bool baseline) {
        Fixture local_fx(3);
        ServerState server;
        server.hyper = small_hyper();
        server.hyper.rounds = 3;
        server.params = glorot_init(local_fx.graph.feature_dim(), server.hyper.hidden_dim, 31);
        if (baseline) return run_fedavg_baseline(server, local_fx.clients, local_fx.eval());
        server.hyper.alpha = 0.0;
        server.hyper.uniform_weights = true;
        server.hyper.interpolate = false;
        return run_federation(server, local_fx.clients, local_fx.eval());
    };
    auto a = run_once(true);
    auto b = run_once(false);
    CHECK((a.final_params.w1 - b.final_params.w1).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < a.rounds.size(); ++i)
        CHECK(a.rounds[i].global.accuracy == b.rounds[i].global.accuracy);
}

TEST_CASE("round reports stay on the simplex and are deterministic") {
    auto run_once = [&]() {
        Fixture fx(4, 7);
        ServerState server;
        server.hyper = small_hyper();
        server.hyper.rounds = 5;
        server.hyper.clients_per_round = 2;
        server.params = glorot_init(fx.graph.feature_dim(), server.hyper.hidden_dim, 41);
        return run_federation(server, fx.clients, fx.eval());
    };
    auto a = run_once();
    auto b = run_once();
    REQUIRE(a.rounds.size() == 5);
    for (std::size_t r = 0; r < a.rounds.size(); ++r) {
        const auto& report = a.rounds[r];
        CHECK(report.weights.gamma.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(report.weights.gamma.minCoeff() > 0.0);
        CHECK(report.weights.gamma_e.sum() == doctest::Approx(1.0).epsilon(1e-9));
        // Uploads arrive in ascending client-id order.
        for (std::size_t i = 1; i < report.uploads.size(); ++i)
            CHECK(report.uploads[i - 1].client_id < report.uploads[i].client_id);
        // Bit-identical across runs.
        CHECK(report.selected == b.rounds[r].selected);
        CHECK((report.weights.gamma - b.rounds[r].weights.gamma).cwiseAbs().maxCoeff() == 0.0);
        CHECK(report.global.accuracy == b.rounds[r].global.accuracy);
        CHECK(report.local_median.delta_sp == b.rounds[r].local_median.delta_sp);
    }
    CHECK((a.final_params.w1 - b.final_params.w1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("diverging training aborts with the round number") {
    Fixture fx(2);
    ServerState server;
    server.hyper = small_hyper();
    server.hyper.learning_rate = 1e155;  // forces an overflow within two rounds
    server.hyper.rounds = 4;
    server.params = glorot_init(fx.graph.feature_dim(), server.hyper.hidden_dim, 51);
    CHECK_THROWS_AS(run_federation(server, fx.clients, fx.eval()), NonFinite);
    try {
        Fixture fx2(2);
        ServerState server2;
        server2.hyper = server.hyper;
        server2.params = glorot_init(fx2.graph.feature_dim(), server2.hyper.hidden_dim, 51);
        run_federation(server2, fx2.clients, fx2.eval());
    } catch (const NonFinite& e) {
        CHECK(std::string(e.what()).find("round") != std::string::npos);
    }
}

TEST_CASE("early stopping halts after a validation plateau") {
    Fixture fx(3);
    ServerState server;
    server.hyper = small_hyper();
    server.hyper.rounds = 60;
    server.hyper.early_stop = true;
    server.hyper.early_stop_patience = 5;
    server.params = glorot_init(fx.graph.feature_dim(), server.hyper.hidden_dim, 61);
    auto result = run_federation(server, fx.clients, fx.eval());
    CHECK(result.rounds.size() < 60);
}
