#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "f2gnn/graph.hpp"

namespace f2gnn {

using Mask = std::vector<std::uint8_t>;  // one flag per node

/// Weights of the 2-layer GCN: W1 (d x h) feeds the hidden layer, W2 (h)
/// is the binary classification head.
struct ModelParams {
    Eigen::MatrixXd w1;
    Eigen::VectorXd w2;

    int input_dim() const { return static_cast<int>(w1.rows()); }
    int hidden_dim() const { return static_cast<int>(w1.cols()); }

    // Elementwise convex interpolation (1-t)*this + t*other.
    ModelParams interpolate(const ModelParams& other, double t) const;

    // Wire format: uint32 d, uint32 h, then (d*h + h) little-endian f64
    // (W1 row-major, then W2). Used for transmission and checkpoints.
    std::vector<std::uint8_t> to_bytes() const;
    static ModelParams from_bytes(const std::vector<std::uint8_t>& bytes);

    void save_checkpoint(const std::string& path) const;
    static ModelParams load_checkpoint(const std::string& path);
};

ModelParams glorot_init(int input_dim, int hidden_dim, std::uint64_t seed);

/// Symmetrically normalized adjacency D^{-1/2} (A + I) D^{-1/2}, kept in
/// CSR form so large graphs never materialize an N x N matrix. Self-loops
/// guarantee every degree is at least one.
class NormalizedAdjacency {
public:
    explicit NormalizedAdjacency(const Graph& g);

    int size() const { return n_; }

    // Returns the product with a dense N x c matrix.
    Eigen::MatrixXd multiply(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

    Eigen::MatrixXd dense() const;

private:
    int n_ = 0;
    std::vector<int> row_ptr_;
    std::vector<int> col_idx_;
    std::vector<double> values_;
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) { return NormalizedAdjacency(g); }

enum class Activation { relu, linear };

struct ForwardTrace {
    Eigen::MatrixXd agg_features;  // A_hat X
    Eigen::MatrixXd pre_hidden;    // A_hat X W1
    Eigen::MatrixXd hidden;        // act(pre_hidden)
    Eigen::VectorXd logits;        // A_hat hidden W2
    Eigen::VectorXd probs;         // sigmoid(logits)
};

// H1 = act(A_hat X W1); logits = A_hat H1 W2; probs = sigmoid(logits).
// Throws ShapeMismatch when dimensions disagree.
ForwardTrace forward(const ModelParams& params, const NormalizedAdjacency& adj,
                     const Eigen::MatrixXd& features, Activation activation);

// Signed soft group gaps of predicted probabilities over a mask:
// sp = mean(p | s=0) - mean(p | s=1); eo is the same restricted to y=1.
// A missing group makes the affected gap 0 and raises its flag.
struct SoftGaps {
    double sp = 0.0;
    double eo = 0.0;
    bool sp_degenerate = false;
    bool eo_degenerate = false;
};

SoftGaps soft_fairness_gaps(const Eigen::VectorXd& probs, const std::vector<int>& labels,
                            const std::vector<int>& sensitive, const Mask& mask);

struct LossResult {
    double loss = 0.0;
    double util = 0.0;       // mean binary cross-entropy over the mask
    double fair = 0.0;       // |sp| + |eo| of the soft gaps
    SoftGaps gaps;
    ModelParams grads;
};

// loss = util + alpha * fair, with full backprop through both terms.
LossResult loss_and_grad(const ModelParams& params, const NormalizedAdjacency& adj,
                         const Eigen::MatrixXd& features, const std::vector<int>& labels,
                         const std::vector<int>& sensitive, const Mask& train_mask, double alpha,
                         Activation activation);

struct AdamState {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    Eigen::MatrixXd m1, v1;  // moments for W1
    Eigen::VectorXd m2, v2;  // moments for W2

    AdamState(double lr, int input_dim, int hidden_dim);
};

// Standard Adam with bias correction; returns the updated parameters and
// advances the state.
ModelParams adam_step(AdamState& state, const ModelParams& params, const ModelParams& grads);

}  // namespace f2gnn
