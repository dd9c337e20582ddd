#ifndef THGNN_MODEL_HPP
#define THGNN_MODEL_HPP

#include <cmath>
#include <vector>

#include "thgnn/autodiff.hpp"
#include "thgnn/common.hpp"
#include "thgnn/graph.hpp"
#include "thgnn/params.hpp"
#include "thgnn/struct_features.hpp"

namespace thgnn {

inline int degree_bucket(int deg, int b_deg) {
    int b = static_cast<int>(std::floor(std::log2(1.0 + static_cast<double>(deg))));
    return std::min(b, b_deg - 1);
}

// Everything a tribe forward pass needs, computed once per graph.
struct TribeContext {
    std::vector<std::vector<int>> adj;  // undirected view
    StructFeatureTable ft;
    Tensor eig_col;                     // n x 1
    Tensor raw;                         // n x 5: deg_in, deg_out, kind, spd, eig
};

inline TribeContext make_tribe_context(const Tribe& t) {
    TribeContext ctx;
    ctx.adj = undirected_view(t);
    ctx.ft = build_feature_table(t);
    int n = t.size();
    ctx.eig_col = Tensor(n, 1);
    ctx.raw = Tensor(n, 5);
    for (int i = 0; i < n; ++i) {
        ctx.eig_col.at(i, 0) = ctx.ft.eig[i];
        ctx.raw.at(i, 0) = static_cast<double>(ctx.ft.deg_in[i]);
        ctx.raw.at(i, 1) = static_cast<double>(ctx.ft.deg_out[i]);
        ctx.raw.at(i, 2) = static_cast<double>(ctx.ft.kind[i]);
        ctx.raw.at(i, 3) = static_cast<double>(ctx.ft.spd[i]);
        ctx.raw.at(i, 4) = ctx.ft.eig[i];
    }
    return ctx;
}

inline std::vector<TribeContext> make_tribe_contexts(const TribeStyleGraph& g, int threads = 1) {
    std::vector<TribeContext> out(g.tribes.size());
    parallel_for(g.tribes.size(), threads,
                 [&](size_t i) { out[i] = make_tribe_context(g.tribes[i]); });
    return out;
}

// Per-node input rows: four embedding lookups concatenated with the
// eigenvector scalar (or the raw numeric features under no_emb).
inline Var embed_nodes(Tape& tp, const TribeContext& ctx, ModelParams& P) {
    if (P.cfg.no_emb) return tp.constant(ctx.raw);
    int n = static_cast<int>(ctx.ft.spd.size());
    std::vector<int> bi(n), bo(n), bk(n), bs(n);
    for (int i = 0; i < n; ++i) {
        bi[i] = degree_bucket(ctx.ft.deg_in[i], P.cfg.b_deg);
        bo[i] = degree_bucket(ctx.ft.deg_out[i], P.cfg.b_deg);
        bk[i] = static_cast<int>(ctx.ft.kind[i]);
        bs[i] = std::min(ctx.ft.spd[i], P.cfg.b_spd - 1);
    }
    Var e_in = tp.row_gather(tp.leaf(P.deg_in_tab), bi);
    Var e_out = tp.row_gather(tp.leaf(P.deg_out_tab), bo);
    Var e_kind = tp.row_gather(tp.leaf(P.kind_tab), bk);
    Var e_spd = tp.row_gather(tp.leaf(P.spd_tab), bs);
    Var eig = tp.constant(ctx.eig_col);
    return tp.concat_cols({e_in, e_out, e_kind, e_spd, eig});
}

// One tribe through the structure encoder: GIN layers over the undirected
// view, then the layer-averaged sum-pooling readout. Returns a 1 x d_t row.
// rng == nullptr means eval mode (no dropout).
inline Var tse_tribe_forward(Tape& tp, const TribeContext& ctx, ModelParams& P, Rng* rng) {
    Var z = embed_nodes(tp, ctx, P);
    int n = tp.rows(z);
    std::vector<int> one_segment(n, 0);

    Var h0 = tp.add_bias_row(tp.matmul(z, tp.leaf(P.proj0_w)), tp.leaf(P.proj0_b));
    Var pooled = tp.segment_sum(h0, one_segment, 1);

    Var h = z;
    for (auto& layer : P.gin) {
        Var agg = tp.add(tp.scale_by_one_plus(h, tp.leaf(layer.eps)), tp.neighbor_sum(h, ctx.adj));
        Var mid = tp.relu(tp.add_bias_row(tp.matmul(agg, tp.leaf(layer.w1)), tp.leaf(layer.b1)));
        h = tp.add_bias_row(tp.matmul(mid, tp.leaf(layer.w2)), tp.leaf(layer.b2));
        if (rng && P.cfg.dropout > 0.0) h = tp.dropout(h, P.cfg.dropout, *rng);
        pooled = tp.add(pooled, tp.segment_sum(h, one_segment, 1));
    }
    return tp.scale(pooled, 1.0 / static_cast<double>(P.cfg.gin_layers + 1));
}

// Deterministic eval-mode representations for all tribes (one tape each).
inline Tensor encode_tribes_eval(const std::vector<TribeContext>& ctxs, ModelParams& P,
                                 int threads = 1) {
    Tensor H(static_cast<int>(ctxs.size()), P.cfg.d_t);
    parallel_for(ctxs.size(), threads, [&](size_t i) {
        Tape tp;
        Var r = tse_tribe_forward(tp, ctxs[i], P, nullptr);
        const auto& v = tp.val(r);
        for (int j = 0; j < P.cfg.d_t; ++j) H.at(static_cast<int>(i), j) = v[j];
    });
    return H;
}

// Columns standardized to zero mean / unit variance over central nodes
// (constant columns are left at zero).
inline Tensor standardize_attrs(const GlobalGraph& g) {
    int n = g.n_central, d = g.attr_dim();
    Tensor X(n, d);
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += g.attrs[i][j];
        mean /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            double c = g.attrs[i][j] - mean;
            var += c * c;
        }
        double sd = std::sqrt(var / n);
        if (sd > 0.0)
            for (int i = 0; i < n; ++i) X.at(i, j) = (g.attrs[i][j] - mean) / sd;
    }
    return X;
}

struct GlobalOut {
    Var h0 = -1;                  // fused central-node representation
    Var alpha_g = -1, alpha_x = -1;  // attention weights (unset under ablations)
    Var probs = -1;
};

// Fusion + global propagation + prediction head on an existing tape.
// hg is the N x d_t tribe-representation input var (ignored under no_tse).
inline GlobalOut global_forward(Tape& tp, Var hg, const Tensor& attrs_std,
                                const std::vector<std::vector<int>>& global_adj,
                                ModelParams& P) {
    const ModelConfig& cfg = P.cfg;
    if (cfg.no_tse && cfg.no_attrs)
        throw ConfigError("no_tse and no_attrs cannot both be set: no model input remains");
    GlobalOut out;

    Var proj_g = -1, proj_x = -1;
    if (!cfg.no_tse) proj_g = tp.matmul(hg, tp.leaf(P.w_g));
    if (!cfg.no_attrs) proj_x = tp.matmul(tp.constant(attrs_std), tp.leaf(P.w_x));

    if (cfg.no_tse) {
        out.h0 = proj_x;
    } else if (cfg.no_attrs) {
        out.h0 = proj_g;
    } else if (cfg.no_fusion) {
        out.h0 = tp.scale(tp.add(proj_g, proj_x), 0.5);
    } else {
        Var cat = tp.concat_cols({proj_g, proj_x});
        Var e_g = tp.leaky_relu(tp.matmul(cat, tp.leaf(P.a_g)), 0.01);
        Var e_x = tp.leaky_relu(tp.matmul(cat, tp.leaf(P.a_x)), 0.01);
        auto [alpha_g, alpha_x] = tp.softmax_pair(e_g, e_x);
        out.alpha_g = alpha_g;
        out.alpha_x = alpha_x;
        out.h0 = tp.add(tp.mul_colvec(proj_g, alpha_g), tp.mul_colvec(proj_x, alpha_x));
    }

    Var h = out.h0;
    if (!cfg.no_ggrl) {
        int n = tp.rows(h);
        Tensor inv_deg(n, 1);
        for (int i = 0; i < n; ++i)
            inv_deg.at(i, 0) = 1.0 / static_cast<double>(global_adj[i].size() + 1);
        Var inv = tp.constant(inv_deg);
        for (auto& w : P.ggrl_w) {
            Var mean = tp.mul_colvec(tp.add(h, tp.neighbor_sum(h, global_adj)), inv);
            h = tp.matmul(mean, tp.leaf(w));
            if (cfg.ggrl_relu) h = tp.relu(h);
        }
    }

    Var logits = tp.add_bias_row(tp.matmul(h, tp.leaf(P.head_w)), tp.leaf(P.head_b));
    out.probs = tp.sigmoid(logits);
    return out;
}

// Full eval-mode pipeline: tribe encoding, fusion, propagation, head.
inline std::vector<double> predict_eval(const TribeStyleGraph& g,
                                        const std::vector<TribeContext>& ctxs, ModelParams& P,
                                        int threads = 1) {
    Tensor H = P.cfg.no_tse ? Tensor(g.global.n_central, P.cfg.d_t)
                            : encode_tribes_eval(ctxs, P, threads);
    Tensor X = standardize_attrs(g.global);
    auto adj = g.global.neighbor_lists();
    Tape tp;
    Var hg = tp.input(H);
    GlobalOut out = global_forward(tp, hg, X, adj, P);
    return tp.val(out.probs);
}

}  // namespace thgnn

#endif
