#include "f2gnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "f2gnn/errors.hpp"

namespace f2gnn {

std::string MetricFlags::to_string() const {
    std::string out;
    auto add = [&](bool set, const char* name) {
        if (!set) return;
        if (!out.empty()) out += '|';
        out += name;
    };
    add(sp_group_empty, "sp_group_empty");
    add(eo_group_empty, "eo_group_empty");
    add(auc_single_class, "auc_single_class");
    add(tradeoff_undefined, "tradeoff_undefined");
    return out.empty() ? "-" : out;
}

double statistical_parity(const std::vector<int>& yhat, const std::vector<int>& sensitive,
                          const Mask& mask, MetricFlags* flags) {
    long positives[2] = {0, 0}, count[2] = {0, 0};
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        if (!mask[i]) continue;
        const int s = sensitive[i];
        ++count[s];
        positives[s] += yhat[i];
    }
    if (count[0] == 0 || count[1] == 0) {
        if (flags) flags->sp_group_empty = true;
        return 0.0;
    }
    return std::abs(static_cast<double>(positives[0]) / static_cast<double>(count[0]) -
                    static_cast<double>(positives[1]) / static_cast<double>(count[1]));
}

double equalized_odds(const std::vector<int>& yhat, const std::vector<int>& labels,
                      const std::vector<int>& sensitive, const Mask& mask, MetricFlags* flags) {
    long positives[2] = {0, 0}, count[2] = {0, 0};
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        if (!mask[i] || labels[i] != 1) continue;
        const int s = sensitive[i];
        ++count[s];
        positives[s] += yhat[i];
    }
    if (count[0] == 0 || count[1] == 0) {
        if (flags) flags->eo_group_empty = true;
        return 0.0;
    }
    return std::abs(static_cast<double>(positives[0]) / static_cast<double>(count[0]) -
                    static_cast<double>(positives[1]) / static_cast<double>(count[1]));
}

double auc(const Eigen::VectorXd& scores, const std::vector<int>& labels, const Mask& mask,
           MetricFlags* flags) {
    std::vector<std::pair<double, int>> items;
    long n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!mask[i]) continue;
        items.emplace_back(scores(static_cast<Eigen::Index>(i)), labels[i]);
        labels[i] == 1 ? ++n_pos : ++n_neg;
    }
    if (n_pos == 0 || n_neg == 0) {
        if (flags) flags->auc_single_class = true;
        return 0.5;
    }
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Sum of positive ranks with mid-ranks for ties.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].first == items[i].first) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (items[k].second == 1) rank_sum_pos += mid_rank;
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::pair<double, double> tradeoffs(double accuracy, double auc_value, double dsp, double deo,
                                    MetricFlags* flags) {
    const double denom = dsp + deo;
    if (denom <= 0.0) {
        if (flags) flags->tradeoff_undefined = true;
        const double inf = std::numeric_limits<double>::infinity();
        return {inf, inf};
    }
    return {accuracy / denom, auc_value / denom};
}

LabelDistribution label_distribution(const Eigen::VectorXd& probs, const Mask& mask, bool soft) {
    double p1 = 0.0;
    long count = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        ++count;
        p1 += soft ? probs(i) : (probs(i) > 0.5 ? 1.0 : 0.0);
    }
    LabelDistribution d;
    if (count > 0) {
        p1 /= static_cast<double>(count);
        d.p = {1.0 - p1, p1};
    }
    return d;
}

namespace {

// x * log2(x / y) with the 0 * log 0 = 0 convention.
double xlog2x_over(double x, double y) {
    if (x <= 0.0) return 0.0;
    return x * std::log2(x / y);
}

}  // namespace

double js_divergence(const LabelDistribution& p, const LabelDistribution& q) {
    double js = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double m = 0.5 * (p.p[static_cast<std::size_t>(k)] + q.p[static_cast<std::size_t>(k)]);
        js += 0.5 * xlog2x_over(p.p[static_cast<std::size_t>(k)], m);
        js += 0.5 * xlog2x_over(q.p[static_cast<std::size_t>(k)], m);
    }
    // Clamp the tiny negative round-off that the log expansion can produce.
    return std::max(0.0, std::min(1.0, js));
}

double point_biserial(const Eigen::VectorXd& x, const std::vector<int>& s) {
    const auto n = static_cast<long>(x.size());
    if (n == 0 || static_cast<long>(s.size()) != n)
        throw ShapeMismatch("point_biserial: size mismatch");
    double sum[2] = {0.0, 0.0};
    long count[2] = {0, 0};
    for (long i = 0; i < n; ++i) {
        sum[s[static_cast<std::size_t>(i)]] += x(i);
        ++count[s[static_cast<std::size_t>(i)]];
    }
    if (count[0] == 0 || count[1] == 0)
        throw EmptyGroup("point_biserial: one sensitive group is empty");
    const double mean = (sum[0] + sum[1]) / static_cast<double>(n);
    double var = 0.0;
    for (long i = 0; i < n; ++i) var += (x(i) - mean) * (x(i) - mean);
    var /= static_cast<double>(n);  // population variance
    if (var <= 0.0) throw ZeroVariance("point_biserial: x has zero variance");
    const double mu0 = sum[0] / static_cast<double>(count[0]);
    const double mu1 = sum[1] / static_cast<double>(count[1]);
    return (mu0 - mu1) / std::sqrt(var) *
           std::sqrt(static_cast<double>(count[0]) * static_cast<double>(count[1]) /
                     (static_cast<double>(n) * static_cast<double>(n)));
}

std::string MetricBundle::csv_header() {
    return "accuracy,auc,delta_sp,delta_eo,tradeoff_acc,tradeoff_auc,flags";
}

std::string MetricBundle::csv_row() const {
    char buf[256];
    auto fmt = [&](double v) {
        if (std::isinf(v)) return std::string("inf");
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    std::string row;
    row += fmt(100.0 * accuracy);
    row += ',' + fmt(100.0 * auc);
    row += ',' + fmt(100.0 * delta_sp);
    row += ',' + fmt(100.0 * delta_eo);
    row += ',' + fmt(tradeoff_acc);
    row += ',' + fmt(tradeoff_auc);
    row += ',' + flags.to_string();
    return row;
}

MetricBundle evaluate(const Eigen::VectorXd& probs, const std::vector<int>& labels,
                      const std::vector<int>& sensitive, const Mask& mask) {
    MetricBundle b;
    std::vector<int> yhat(labels.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
        yhat[i] = probs(static_cast<Eigen::Index>(i)) > 0.5 ? 1 : 0;

    long correct = 0, total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!mask[i]) continue;
        ++total;
        if (yhat[i] == labels[i]) ++correct;
    }
    b.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    b.auc = auc(probs, labels, mask, &b.flags);
    b.delta_sp = statistical_parity(yhat, sensitive, mask, &b.flags);
    b.delta_eo = equalized_odds(yhat, labels, sensitive, mask, &b.flags);
    std::tie(b.tradeoff_acc, b.tradeoff_auc) =
        tradeoffs(b.accuracy, b.auc, b.delta_sp, b.delta_eo, &b.flags);
    return b;
}

}  // namespace f2gnn
