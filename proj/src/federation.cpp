#include "f2gnn/federation.hpp"

#include <algorithm>
#include <cmath>

#include "f2gnn/errors.hpp"
#include "f2gnn/rng.hpp"

namespace f2gnn {

namespace {

Mask restrict_mask(const Mask& global, const std::vector<int>& global_ids) {
    Mask local(global_ids.size(), 0);
    for (std::size_t i = 0; i < global_ids.size(); ++i)
        local[i] = global[static_cast<std::size_t>(global_ids[i])];
    return local;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
    const double m = x.maxCoeff();
    Eigen::VectorXd e = (x.array() - m).exp();
    return e / e.sum();
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

MetricBundle aggregate_bundle(const std::vector<MetricBundle>& bundles, bool median) {
    MetricBundle out;
    auto collect = [&](auto field) {
        std::vector<double> v;
        v.reserve(bundles.size());
        for (const auto& b : bundles) v.push_back(field(b));
        return median ? median_of(std::move(v)) : mean_of(v);
    };
    out.accuracy = collect([](const MetricBundle& b) { return b.accuracy; });
    out.auc = collect([](const MetricBundle& b) { return b.auc; });
    out.delta_sp = collect([](const MetricBundle& b) { return b.delta_sp; });
    out.delta_eo = collect([](const MetricBundle& b) { return b.delta_eo; });
    std::tie(out.tradeoff_acc, out.tradeoff_auc) =
        tradeoffs(out.accuracy, out.auc, out.delta_sp, out.delta_eo, &out.flags);
    for (const auto& b : bundles) {
        out.flags.sp_group_empty |= b.flags.sp_group_empty;
        out.flags.eo_group_empty |= b.flags.eo_group_empty;
        out.flags.auc_single_class |= b.flags.auc_single_class;
    }
    return out;
}

void check_finite(const ModelParams& p, int round) {
    if (!p.w1.allFinite() || !p.w2.allFinite())
        throw NonFinite("non-finite model parameters at round " + std::to_string(round));
}

}  // namespace

SplitMasks split_nodes(int num_nodes, double train_fraction, double val_fraction,
                       double test_fraction, std::uint64_t seed) {
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw ValidationError("split fractions must sum to 1");
    if (train_fraction <= 0.0 || val_fraction < 0.0 || test_fraction < 0.0)
        throw ValidationError("split fractions must be nonnegative with train > 0");
    std::vector<int> order(static_cast<std::size_t>(num_nodes));
    for (int i = 0; i < num_nodes; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * num_nodes));
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * num_nodes));
    SplitMasks m{Mask(static_cast<std::size_t>(num_nodes), 0), Mask(static_cast<std::size_t>(num_nodes), 0),
                 Mask(static_cast<std::size_t>(num_nodes), 0)};
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto node = static_cast<std::size_t>(order[i]);
        if (i < n_train)
            m.train[node] = 1;
        else if (i < n_train + n_val)
            m.val[node] = 1;
        else
            m.test[node] = 1;
    }
    return m;
}

ClientState::ClientState(int id_, ClientGraph cg, const Mask& global_train, const Mask& global_val,
                         const Mask& global_test)
    : id(id_),
      graph(std::move(cg.graph)),
      adj(graph),
      global_ids(std::move(cg.global_ids)),
      train_mask(restrict_mask(global_train, global_ids)),
      val_mask(restrict_mask(global_val, global_ids)),
      test_mask(restrict_mask(global_test, global_ids)) {
    gbs = edge_group_stats(graph).gbs;
}

std::vector<ClientState> make_clients(std::vector<ClientGraph> parts, const SplitMasks& global) {
    std::vector<ClientState> clients;
    clients.reserve(parts.size());
    int id = 0;
    for (auto& part : parts)
        clients.emplace_back(id++, std::move(part), global.train, global.val, global.test);
    return clients;
}

ClientUpload client_local_update(ClientState& client, const ModelParams& global_params,
                                 const FedHyper& hyper) {
    double js = 0.0;
    ModelParams init;
    if (!hyper.interpolate) {
        init = global_params;  // FedAvg local initialization
    } else {
        if (hyper.js_override) {
            js = *hyper.js_override;
        } else {
            const auto p_global =
                forward(global_params, client.adj, client.graph.features, hyper.activation).probs;
            const auto p_local =
                forward(client.params, client.adj, client.graph.features, hyper.activation).probs;
            const auto d_global =
                label_distribution(p_global, client.train_mask, hyper.soft_label_distribution);
            const auto d_local =
                label_distribution(p_local, client.train_mask, hyper.soft_label_distribution);
            js = js_divergence(d_global, d_local);
        }
        init = client.params.interpolate(global_params, js);
    }

    AdamState adam(hyper.learning_rate, init.input_dim(), init.hidden_dim());
    ModelParams params = std::move(init);
    for (int e = 0; e < hyper.local_epochs; ++e) {
        const auto res = loss_and_grad(params, client.adj, client.graph.features,
                                       client.graph.labels, client.graph.sensitive,
                                       client.train_mask, hyper.alpha, hyper.activation);
        params = adam_step(adam, params, res.grads);
    }

    const auto probs = forward(params, client.adj, client.graph.features, hyper.activation).probs;
    const auto gaps =
        soft_fairness_gaps(probs, client.graph.labels, client.graph.sensitive, client.train_mask);

    ClientUpload up;
    up.client_id = client.id;
    up.params = params;
    up.delta_sp = std::abs(gaps.sp);
    up.delta_eo = std::abs(gaps.eo);
    up.fair_loss = up.delta_sp + up.delta_eo;
    up.gbs = client.gbs;
    up.js = js;
    up.sp_degenerate = gaps.sp_degenerate;
    up.eo_degenerate = gaps.eo_degenerate;

    client.params = params;
    client.last_fair_loss = up.fair_loss;
    return up;
}

ServerWeights server_combined_weights(const std::vector<ClientUpload>& uploads, double lambda,
                                      double tau, bool invert_fairness_weight, bool uniform) {
    if (uploads.empty()) throw ValidationError("no uploads to weight");
    if (tau <= 0.0) throw ValidationError("temperature must be positive");
    const auto k = static_cast<Eigen::Index>(uploads.size());

    ServerWeights w;
    Eigen::VectorXd balance(k);
    w.gamma_f_raw.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        balance(i) = uploads[static_cast<std::size_t>(i)].gbs;
        w.gamma_f_raw(i) = uploads[static_cast<std::size_t>(i)].delta_sp +
                           uploads[static_cast<std::size_t>(i)].delta_eo;
    }
    w.gamma_e = softmax(balance);
    const Eigen::VectorXd fairness_input =
        invert_fairness_weight ? Eigen::VectorXd(-w.gamma_f_raw) : w.gamma_f_raw;
    w.gamma_f = softmax(fairness_input).array().exp();
    w.gamma = uniform ? Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k))
                      : softmax((lambda * w.gamma_e + w.gamma_f) / tau);
    return w;
}

ModelParams server_aggregate(const std::vector<ClientUpload>& uploads,
                             const Eigen::VectorXd& gamma) {
    if (uploads.empty() || gamma.size() != static_cast<Eigen::Index>(uploads.size()))
        throw ShapeMismatch("aggregate: weight/upload count mismatch");
    ModelParams out;
    out.w1 = Eigen::MatrixXd::Zero(uploads[0].params.w1.rows(), uploads[0].params.w1.cols());
    out.w2 = Eigen::VectorXd::Zero(uploads[0].params.w2.size());
    for (std::size_t i = 0; i < uploads.size(); ++i) {
        const auto& p = uploads[i].params;
        if (p.w1.rows() != out.w1.rows() || p.w1.cols() != out.w1.cols() ||
            p.w2.size() != out.w2.size())
            throw ShapeMismatch("aggregate: client parameter shapes disagree");
        out.w1 += gamma(static_cast<Eigen::Index>(i)) * p.w1;
        out.w2 += gamma(static_cast<Eigen::Index>(i)) * p.w2;
    }
    return out;
}

FederationResult run_federation(ServerState& server, std::vector<ClientState>& clients,
                                const EvalContext& eval) {
    const auto& hyper = server.hyper;
    if (clients.empty()) throw ValidationError("no clients");
    if (server.params.w1.size() == 0)
        throw ValidationError("server parameters must be initialized before running");
    const int total = static_cast<int>(clients.size());
    const int select = hyper.clients_per_round <= 0
                           ? total
                           : std::min(hyper.clients_per_round, total);

    // Round 0: every client starts from the broadcast global model, so the
    // first interpolation coefficient is exactly 0.
    for (auto& c : clients) c.params = server.params;

    Rng server_rng = Rng(hyper.server_seed).child(0xf3d);

    FederationResult result;
    result.rounds.reserve(static_cast<std::size_t>(hyper.rounds));
    double best_val_accuracy = -1.0;
    int rounds_since_best = 0;

    for (int t = 1; t <= hyper.rounds; ++t) {
        server.round = t;
        auto selected = server_rng.sample_without_replacement(total, select);
        std::sort(selected.begin(), selected.end());

        // Local-update phase. Clients are independent; the fixed id order is
        // the deterministic combine barrier.
        std::vector<ClientUpload> uploads;
        uploads.reserve(selected.size());
        for (int id : selected) {
            try {
                uploads.push_back(client_local_update(clients[static_cast<std::size_t>(id)],
                                                      server.params, hyper));
            } catch (const NonFinite& e) {
                throw NonFinite("round " + std::to_string(t) + ", client " + std::to_string(id) +
                                ": " + e.what());
            }
            check_finite(uploads.back().params, t);
        }

        // Global-update phase.
        auto weights = server_combined_weights(uploads, hyper.lambda, hyper.tau,
                                               hyper.invert_fairness_weight, hyper.uniform_weights);
        server.params = server_aggregate(uploads, weights.gamma);
        check_finite(server.params, t);

        RoundReport report;
        report.round = t;
        report.selected = selected;
        report.uploads = std::move(uploads);
        report.weights = std::move(weights);

        const auto global_probs =
            forward(server.params, eval.adj, eval.graph.features, hyper.activation).probs;
        report.global =
            evaluate(global_probs, eval.graph.labels, eval.graph.sensitive, eval.test_mask);

        std::vector<MetricBundle> local_bundles;
        local_bundles.reserve(clients.size());
        for (const auto& c : clients) {
            const auto& model = hyper.local_eval_with_global ? server.params : c.params;
            const auto probs = forward(model, c.adj, c.graph.features, hyper.activation).probs;
            local_bundles.push_back(
                evaluate(probs, c.graph.labels, c.graph.sensitive, c.test_mask));
        }
        report.local_median = aggregate_bundle(local_bundles, hyper.local_metric_median);
        result.rounds.push_back(std::move(report));

        if (hyper.early_stop) {
            const auto val =
                evaluate(global_probs, eval.graph.labels, eval.graph.sensitive, eval.val_mask);
            if (val.accuracy > best_val_accuracy + 1e-12) {
                best_val_accuracy = val.accuracy;
                rounds_since_best = 0;
            } else if (++rounds_since_best >= hyper.early_stop_patience) {
                break;
            }
        }
    }
    result.final_params = server.params;
    return result;
}

FederationResult run_fedavg_baseline(ServerState& server, std::vector<ClientState>& clients,
                                     const EvalContext& eval) {
    server.hyper.uniform_weights = true;
    server.hyper.interpolate = false;
    server.hyper.alpha = 0.0;
    return run_federation(server, clients, eval);
}

}  // namespace f2gnn
