#ifndef THGNN_METRICS_HPP
#define THGNN_METRICS_HPP

#include <algorithm>
#include <numeric>
#include <vector>

#include "thgnn/common.hpp"

namespace thgnn {

struct BinaryMetrics {
    double f1 = 0.0, precision = 0.0, recall = 0.0, accuracy = 0.0;
};

inline BinaryMetrics classification_metrics(const std::vector<int>& preds,
                                            const std::vector<int>& y) {
    if (preds.size() != y.size()) throw ShapeError("metrics: size mismatch");
    int tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (preds[i] == 1 && y[i] == 1) ++tp;
        else if (preds[i] == 1) ++fp;
        else if (y[i] == 1) ++fn;
        else ++tn;
    }
    BinaryMetrics m;
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    m.accuracy = y.empty() ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(y.size());
    return m;
}

inline double compute_f1(const std::vector<int>& preds, const std::vector<int>& y) {
    return classification_metrics(preds, y).f1;
}

// Mann-Whitney formulation via average ranks; ties get the midrank, which
// matches the (concordant + 0.5 * tied) / (n_pos * n_neg) pairwise count.
inline double compute_auc(const std::vector<double>& scores, const std::vector<int>& y) {
    if (scores.size() != y.size()) throw ShapeError("auc: size mismatch");
    size_t n = scores.size();
    size_t n_pos = 0;
    for (int v : y) n_pos += v == 1 ? 1 : 0;
    size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw InvariantViolation("auc: both classes required");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (size_t k = i; k < j; ++k)
            if (y[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    return (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct Split {
    std::vector<int> train, val, test;
};

// Stratified shuffle split: train_ratio of each class into train, the rest
// halved into val/test. Deterministic per seed.
inline Split split_dataset(const std::vector<int>& labels, double train_ratio, uint64_t seed) {
    if (labels.size() < 10) throw InvariantViolation("split: need at least 10 labeled nodes");
    if (train_ratio <= 0.0 || train_ratio >= 1.0)
        throw ConfigError("train_ratio must be in (0,1)");
    std::vector<int> pos, neg;
    for (size_t i = 0; i < labels.size(); ++i)
        (labels[i] == 1 ? pos : neg).push_back(static_cast<int>(i));

    Rng rng(Rng::key({seed, 0x73706c69u}));
    rng.shuffle(pos);
    rng.shuffle(neg);

    Split s;
    for (auto* cls : {&pos, &neg}) {
        size_t n_train = static_cast<size_t>(std::llround(train_ratio * cls->size()));
        n_train = std::min(n_train, cls->size());
        size_t n_rest = cls->size() - n_train;
        size_t n_val = n_rest / 2;
        for (size_t k = 0; k < cls->size(); ++k) {
            int idx = (*cls)[k];
            if (k < n_train) s.train.push_back(idx);
            else if (k < n_train + n_val) s.val.push_back(idx);
            else s.test.push_back(idx);
        }
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

}  // namespace thgnn

#endif
