#include "f2gnn/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "f2gnn/errors.hpp"
#include "f2gnn/rng.hpp"

namespace f2gnn {

namespace {

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void append_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw FormatError("model buffer truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
}

double read_f64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + 8 > in.size()) throw FormatError("model buffer truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(bits);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

ModelParams ModelParams::interpolate(const ModelParams& other, double t) const {
    if (w1.rows() != other.w1.rows() || w1.cols() != other.w1.cols() ||
        w2.size() != other.w2.size())
        throw ShapeMismatch("cannot interpolate parameters of different shapes");
    ModelParams out;
    out.w1 = (1.0 - t) * w1 + t * other.w1;
    out.w2 = (1.0 - t) * w2 + t * other.w2;
    return out;
}

std::vector<std::uint8_t> ModelParams::to_bytes() const {
    std::vector<std::uint8_t> out;
    const auto d = static_cast<std::uint32_t>(w1.rows());
    const auto h = static_cast<std::uint32_t>(w1.cols());
    out.reserve(8 + 8 * (static_cast<std::size_t>(d) * h + h));
    append_u32(out, d);
    append_u32(out, h);
    for (Eigen::Index i = 0; i < w1.rows(); ++i)
        for (Eigen::Index j = 0; j < w1.cols(); ++j) append_f64(out, w1(i, j));
    for (Eigen::Index i = 0; i < w2.size(); ++i) append_f64(out, w2(i));
    return out;
}

ModelParams ModelParams::from_bytes(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    const auto d = static_cast<int>(read_u32(bytes, pos));
    const auto h = static_cast<int>(read_u32(bytes, pos));
    if (d < 1 || h < 1) throw FormatError("model buffer has invalid shape header");
    ModelParams p;
    p.w1.resize(d, h);
    p.w2.resize(h);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < h; ++j) p.w1(i, j) = read_f64(bytes, pos);
    for (int i = 0; i < h; ++i) p.w2(i) = read_f64(bytes, pos);
    if (pos != bytes.size()) throw FormatError("model buffer has trailing bytes");
    return p;
}

void ModelParams::save_checkpoint(const std::string& path) const {
    const auto bytes = to_bytes();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ModelParams ModelParams::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

ModelParams glorot_init(int input_dim, int hidden_dim, std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1) throw ValidationError("model dims must be positive");
    Rng rng(seed);
    ModelParams p;
    p.w1.resize(input_dim, hidden_dim);
    const double limit1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
    for (int i = 0; i < input_dim; ++i)
        for (int j = 0; j < hidden_dim; ++j) p.w1(i, j) = limit1 * (2.0 * rng.uniform() - 1.0);
    p.w2.resize(hidden_dim);
    const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden_dim + 1));
    for (int j = 0; j < hidden_dim; ++j) p.w2(j) = limit2 * (2.0 * rng.uniform() - 1.0);
    return p;
}

NormalizedAdjacency::NormalizedAdjacency(const Graph& g) : n_(g.num_nodes) {
    std::vector<int> degree(static_cast<std::size_t>(n_), 1);  // self-loop
    for (const auto& [u, v] : g.edges) {
        ++degree[static_cast<std::size_t>(u)];
        ++degree[static_cast<std::size_t>(v)];
    }
    std::vector<double> dinv_sqrt(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i)
        dinv_sqrt[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(static_cast<double>(degree[static_cast<std::size_t>(i)]));

    row_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (const auto& [u, v] : g.edges) {
        ++row_ptr_[static_cast<std::size_t>(u) + 1];
        ++row_ptr_[static_cast<std::size_t>(v) + 1];
    }
    for (int i = 0; i < n_; ++i) ++row_ptr_[static_cast<std::size_t>(i) + 1];  // self-loop
    for (int i = 0; i < n_; ++i) row_ptr_[static_cast<std::size_t>(i) + 1] += row_ptr_[static_cast<std::size_t>(i)];

    col_idx_.resize(static_cast<std::size_t>(row_ptr_.back()));
    values_.resize(col_idx_.size());
    std::vector<int> fill(row_ptr_.begin(), row_ptr_.end() - 1);
    auto put = [&](int r, int c) {
        const auto slot = static_cast<std::size_t>(fill[static_cast<std::size_t>(r)]++);
        col_idx_[slot] = c;
        values_[slot] = dinv_sqrt[static_cast<std::size_t>(r)] * dinv_sqrt[static_cast<std::size_t>(c)];
    };
    for (int i = 0; i < n_; ++i) put(i, i);
    for (const auto& [u, v] : g.edges) {
        put(u, v);
        put(v, u);
    }
}

Eigen::MatrixXd NormalizedAdjacency::multiply(const Eigen::MatrixXd& x) const {
    if (x.rows() != n_) throw ShapeMismatch("adjacency/matrix row mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, x.cols());
    for (int i = 0; i < n_; ++i) {
        for (int k = row_ptr_[static_cast<std::size_t>(i)]; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
            out.row(i) += values_[static_cast<std::size_t>(k)] * x.row(col_idx_[static_cast<std::size_t>(k)]);
        }
    }
    return out;
}

Eigen::VectorXd NormalizedAdjacency::multiply(const Eigen::VectorXd& x) const {
    if (x.size() != n_) throw ShapeMismatch("adjacency/vector size mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (int k = row_ptr_[static_cast<std::size_t>(i)]; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
            acc += values_[static_cast<std::size_t>(k)] * x(col_idx_[static_cast<std::size_t>(k)]);
        out(i) = acc;
    }
    return out;
}

Eigen::MatrixXd NormalizedAdjacency::dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int k = row_ptr_[static_cast<std::size_t>(i)]; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
            out(i, col_idx_[static_cast<std::size_t>(k)]) = values_[static_cast<std::size_t>(k)];
    return out;
}

ForwardTrace forward(const ModelParams& params, const NormalizedAdjacency& adj,
                     const Eigen::MatrixXd& features, Activation activation) {
    if (features.rows() != adj.size()) throw ShapeMismatch("feature rows != graph size");
    if (features.cols() != params.w1.rows())
        throw ShapeMismatch("feature dim " + std::to_string(features.cols()) +
                            " != W1 input dim " + std::to_string(params.w1.rows()));
    ForwardTrace t;
    t.agg_features = adj.multiply(features);
    t.pre_hidden = t.agg_features * params.w1;
    t.hidden = activation == Activation::relu ? t.pre_hidden.cwiseMax(0.0) : t.pre_hidden;
    t.logits = adj.multiply(Eigen::VectorXd(t.hidden * params.w2));
    t.probs = t.logits.unaryExpr([](double z) { return sigmoid(z); });
    return t;
}

SoftGaps soft_fairness_gaps(const Eigen::VectorXd& probs, const std::vector<int>& labels,
                            const std::vector<int>& sensitive, const Mask& mask) {
    double sum[2] = {0.0, 0.0}, sum_pos[2] = {0.0, 0.0};
    long count[2] = {0, 0}, count_pos[2] = {0, 0};
    for (int i = 0; i < probs.size(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const int s = sensitive[static_cast<std::size_t>(i)];
        sum[s] += probs(i);
        ++count[s];
        if (labels[static_cast<std::size_t>(i)] == 1) {
            sum_pos[s] += probs(i);
            ++count_pos[s];
        }
    }
    SoftGaps gaps;
    if (count[0] > 0 && count[1] > 0)
        gaps.sp = sum[0] / static_cast<double>(count[0]) - sum[1] / static_cast<double>(count[1]);
    else
        gaps.sp_degenerate = true;
    if (count_pos[0] > 0 && count_pos[1] > 0)
        gaps.eo = sum_pos[0] / static_cast<double>(count_pos[0]) -
                  sum_pos[1] / static_cast<double>(count_pos[1]);
    else
        gaps.eo_degenerate = true;
    return gaps;
}

LossResult loss_and_grad(const ModelParams& params, const NormalizedAdjacency& adj,
                         const Eigen::MatrixXd& features, const std::vector<int>& labels,
                         const std::vector<int>& sensitive, const Mask& train_mask, double alpha,
                         Activation activation) {
    const int n = adj.size();
    long n_train = 0;
    for (int i = 0; i < n; ++i) n_train += train_mask[static_cast<std::size_t>(i)] ? 1 : 0;
    if (n_train == 0) throw ValidationError("train mask is empty");

    const ForwardTrace trace = forward(params, adj, features, activation);

    LossResult res;
    // Utility: mean binary cross-entropy over the mask, computed from logits.
    double util = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!train_mask[static_cast<std::size_t>(i)]) continue;
        const double z = trace.logits(i);
        const double y = static_cast<double>(labels[static_cast<std::size_t>(i)]);
        util += y * softplus(-z) + (1.0 - y) * softplus(z);
    }
    util /= static_cast<double>(n_train);

    res.gaps = soft_fairness_gaps(trace.probs, labels, sensitive, train_mask);
    res.util = util;
    res.fair = std::abs(res.gaps.sp) + std::abs(res.gaps.eo);
    res.loss = util + alpha * res.fair;

    // d(loss)/d(logit). Utility: (p - y)/|T|. Penalty: routed through
    // p(1-p) with the group-mean weights of each soft gap.
    long count[2] = {0, 0}, count_pos[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
        if (!train_mask[static_cast<std::size_t>(i)]) continue;
        const int s = sensitive[static_cast<std::size_t>(i)];
        ++count[s];
        if (labels[static_cast<std::size_t>(i)] == 1) ++count_pos[s];
    }
    const double sp_sign = sign_or_zero(res.gaps.sp);
    const double eo_sign = sign_or_zero(res.gaps.eo);
    const bool sp_active = !res.gaps.sp_degenerate;
    const bool eo_active = !res.gaps.eo_degenerate;

    Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (!train_mask[static_cast<std::size_t>(i)]) continue;
        const double p = trace.probs(i);
        const double y = static_cast<double>(labels[static_cast<std::size_t>(i)]);
        double g = (p - y) / static_cast<double>(n_train);
        const int s = sensitive[static_cast<std::size_t>(i)];
        double dpenalty_dp = 0.0;
        if (sp_active)
            dpenalty_dp += sp_sign * (s == 0 ? 1.0 / static_cast<double>(count[0])
                                             : -1.0 / static_cast<double>(count[1]));
        if (eo_active && labels[static_cast<std::size_t>(i)] == 1)
            dpenalty_dp += eo_sign * (s == 0 ? 1.0 / static_cast<double>(count_pos[0])
                                             : -1.0 / static_cast<double>(count_pos[1]));
        g += alpha * dpenalty_dp * p * (1.0 - p);
        dlogits(i) = g;
    }

    // Backprop: logits = A (H1 w2), H1 = act(A X W1).
    const Eigen::VectorXd a_dlogits = adj.multiply(dlogits);
    res.grads.w2 = trace.hidden.transpose() * a_dlogits;
    Eigen::MatrixXd dhidden = a_dlogits * params.w2.transpose();
    if (activation == Activation::relu) {
        dhidden.array() *= (trace.pre_hidden.array() > 0.0).cast<double>();
    }
    res.grads.w1 = trace.agg_features.transpose() * dhidden;

    if (!std::isfinite(res.loss)) throw NonFinite("loss is not finite");
    return res;
}

AdamState::AdamState(double lr, int input_dim, int hidden_dim)
    : learning_rate(lr),
      m1(Eigen::MatrixXd::Zero(input_dim, hidden_dim)),
      v1(Eigen::MatrixXd::Zero(input_dim, hidden_dim)),
      m2(Eigen::VectorXd::Zero(hidden_dim)),
      v2(Eigen::VectorXd::Zero(hidden_dim)) {}

ModelParams adam_step(AdamState& state, const ModelParams& params, const ModelParams& grads) {
    if (params.w1.rows() != grads.w1.rows() || params.w1.cols() != grads.w1.cols() ||
        params.w2.size() != grads.w2.size() || params.w1.rows() != state.m1.rows() ||
        params.w1.cols() != state.m1.cols())
        throw ShapeMismatch("adam: parameter/gradient/state shapes disagree");

    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    ModelParams out;
    state.m1 = state.beta1 * state.m1 + (1.0 - state.beta1) * grads.w1;
    state.v1 = state.beta2 * state.v1 + (1.0 - state.beta2) * grads.w1.cwiseProduct(grads.w1);
    out.w1 = params.w1.array() -
             state.learning_rate * (state.m1.array() / bc1) /
                 ((state.v1.array() / bc2).sqrt() + state.epsilon);

    state.m2 = state.beta1 * state.m2 + (1.0 - state.beta1) * grads.w2;
    state.v2 = state.beta2 * state.v2 + (1.0 - state.beta2) * grads.w2.cwiseProduct(grads.w2);
    out.w2 = params.w2.array() -
             state.learning_rate * (state.m2.array() / bc1) /
                 ((state.v2.array() / bc2).sqrt() + state.epsilon);
    return out;
}

}  // namespace f2gnn
