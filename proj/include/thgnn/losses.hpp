#ifndef THGNN_LOSSES_HPP
#define THGNN_LOSSES_HPP

#include <vector>

#include "thgnn/autodiff.hpp"
#include "thgnn/common.hpp"

namespace thgnn {

struct LossConfig {
    double alpha = 0.5;       // weight of the contrastive term
    double tau = 0.2;         // InfoNCE temperature
    double clamp_eps = 1e-12;

    void validate() const {
        if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
        if (tau <= 0.0) throw ConfigError("tau must be > 0");
    }
};

inline Var bce_loss(Tape& tp, Var probs, const std::vector<double>& y,
                    const std::vector<int>& mask, double eps = 1e-12) {
    return tp.bce_masked(probs, y, mask, eps);
}

// InfoNCE over two view matrices: rows are L2-normalized, similarities are
// cosine / tau, positives on the diagonal. loss = mean_i (logsumexp_j s_ij - s_ii).
inline Var infonce_loss(Tape& tp, Var q, Var k, const LossConfig& cfg) {
    cfg.validate();
    if (tp.rows(q) < 2) throw InvariantViolation("infonce: batch must have at least 2 rows");
    if (tp.rows(q) != tp.rows(k) || tp.cols(q) != tp.cols(k))
        throw ShapeError("infonce: view shapes differ");
    Var qn = tp.l2_normalize_rows(q);
    Var kn = tp.l2_normalize_rows(k);
    Var s = tp.scale(tp.matmul_nt(qn, kn), 1.0 / cfg.tau);
    Var per_row = tp.sub(tp.row_logsumexp(s), tp.take_diag(s));
    return tp.mean_all(per_row);
}

// Contrastive term over shuffled mini-batches; the result is the mean over
// all rows (batch losses weighted by batch size). Batch membership depends
// only on the rng, so it is reproducible per (seed, epoch).
inline Var infonce_batched(Tape& tp, Var q, Var k, const LossConfig& cfg, int batch_size,
                           Rng& rng) {
    int n = tp.rows(q);
    if (batch_size < 2) throw ConfigError("cl_batch must be >= 2");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    Var total = -1;
    int covered = 0;
    for (int start = 0; start < n; start += batch_size) {
        int end = std::min(start + batch_size, n);
        if (end - start < 2) break;  // a trailing singleton has no negatives
        std::vector<int> idx(order.begin() + start, order.begin() + end);
        Var l = infonce_loss(tp, tp.row_gather(q, idx), tp.row_gather(k, idx), cfg);
        Var weighted = tp.scale(l, static_cast<double>(end - start));
        total = total < 0 ? weighted : tp.add(total, weighted);
        covered += end - start;
    }
    if (total < 0) throw InvariantViolation("infonce: no batch with >= 2 rows");
    return tp.scale(total, 1.0 / static_cast<double>(covered));
}

inline Var total_loss(Tape& tp, Var bce, Var cl, const LossConfig& cfg) {
    return tp.add_scaled(bce, cl, cfg.alpha);
}

}  // namespace thgnn

#endif
