#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "f2gnn/nn.hpp"

namespace f2gnn {

/// Degeneracy indicators. Evaluation never aborts a run; empty groups or
/// one-class masks yield a neutral value plus the matching flag.
struct MetricFlags {
    bool sp_group_empty = false;
    bool eo_group_empty = false;
    bool auc_single_class = false;
    bool tradeoff_undefined = false;

    bool any() const {
        return sp_group_empty || eo_group_empty || auc_single_class || tradeoff_undefined;
    }
    std::string to_string() const;  // "-" when clean, else "sp_group_empty|..."
};

// |P(yhat=1 | s=0) - P(yhat=1 | s=1)| over the mask; 0 + flag if a group is empty.
double statistical_parity(const std::vector<int>& yhat, const std::vector<int>& sensitive,
                          const Mask& mask, MetricFlags* flags = nullptr);

// Same conditioned on y=1 (true positive rate difference).
double equalized_odds(const std::vector<int>& yhat, const std::vector<int>& labels,
                      const std::vector<int>& sensitive, const Mask& mask,
                      MetricFlags* flags = nullptr);

// Rank-based Mann-Whitney estimator, ties counted 1/2. Returns 0.5 + flag
// when the mask lacks a positive or a negative.
double auc(const Eigen::VectorXd& scores, const std::vector<int>& labels, const Mask& mask,
           MetricFlags* flags = nullptr);

// (metric / (dsp + deo)) pair; scale-invariant, so accepts metrics either in
// [0,1] or percent as long as dsp/deo use the same unit. Denominator 0 yields
// +inf with the tradeoff_undefined flag.
std::pair<double, double> tradeoffs(double accuracy, double auc_value, double dsp, double deo,
                                    MetricFlags* flags = nullptr);

/// Distribution over the two predicted classes: mean of per-node
/// [1-p, p] over a node set (or a hard-argmax histogram).
struct LabelDistribution {
    std::array<double, 2> p{0.5, 0.5};
};

LabelDistribution label_distribution(const Eigen::VectorXd& probs, const Mask& mask, bool soft);

// Jensen-Shannon divergence, base-2 logarithm so the value lies in [0, 1].
double js_divergence(const LabelDistribution& p, const LabelDistribution& q);

// Point-biserial correlation with population (divide-by-N) standard
// deviation; identical to the Pearson correlation against the indicator.
// Throws EmptyGroup / ZeroVariance.
double point_biserial(const Eigen::VectorXd& x, const std::vector<int>& s);

struct MetricBundle {
    double accuracy = 0.0;
    double auc = 0.0;
    double delta_sp = 0.0;
    double delta_eo = 0.0;
    double tradeoff_acc = 0.0;
    double tradeoff_auc = 0.0;
    MetricFlags flags;

    // CSV row (metrics rendered x100, tradeoffs as tabulated) and the fixed
    // header matching it.
    static std::string csv_header();
    std::string csv_row() const;
};

// Full evaluation of predicted probabilities on a mask. Hard predictions use
// the 0.5 threshold; ties classify as 0.
MetricBundle evaluate(const Eigen::VectorXd& probs, const std::vector<int>& labels,
                      const std::vector<int>& sensitive, const Mask& mask);

}  // namespace f2gnn
