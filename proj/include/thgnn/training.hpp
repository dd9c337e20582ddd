#ifndef THGNN_TRAINING_HPP
#define THGNN_TRAINING_HPP

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "thgnn/autodiff.hpp"
#include "thgnn/common.hpp"
#include "thgnn/csv.hpp"
#include "thgnn/graph.hpp"
#include "thgnn/losses.hpp"
#include "thgnn/metrics.hpp"
#include "thgnn/model.hpp"
#include "thgnn/optim.hpp"
#include "thgnn/params.hpp"

namespace thgnn {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 0.0;
    double alpha = 0.5;
    double tau = 0.2;
    int epochs = 100;
    int hidden = 64;
    double dropout = 0.1;
    uint64_t seed = 0;
    double train_ratio = 0.6;
    int cl_batch = 256;
    int d_e = 16;
    bool no_tse = false, no_ggrl = false, no_cl = false;
    bool no_fusion = false, no_attrs = false, no_emb = false;

    void validate() const {
        if (lr <= 0.0) throw ConfigError("lr must be > 0");
        if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
        if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
        if (tau <= 0.0) throw ConfigError("tau must be > 0");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (hidden < 1 || d_e < 1) throw ConfigError("widths must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
        if (train_ratio <= 0.0 || train_ratio >= 1.0)
            throw ConfigError("train_ratio must be in (0,1)");
        if (cl_batch < 2) throw ConfigError("cl_batch must be >= 2");
    }

    ModelConfig model_config(int attr_dim) const {
        ModelConfig m;
        m.d_e = d_e;
        m.d_t = hidden;
        m.hidden = hidden;
        m.attr_dim = attr_dim;
        m.dropout = dropout;
        m.no_tse = no_tse;
        m.no_ggrl = no_ggrl;
        m.no_cl = no_cl;
        m.no_fusion = no_fusion;
        m.no_attrs = no_attrs;
        m.no_emb = no_emb;
        return m;
    }

    LossConfig loss_config() const { return LossConfig{alpha, tau, 1e-12}; }
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "lr",       "weight_decay", "alpha",    "tau",      "epochs",   "hidden",
        "dropout",  "seed",         "train_ratio", "cl_batch", "d_e",
        "no_tse",   "no_ggrl",      "no_cl",    "no_fusion", "no_attrs", "no_emb"};
    for (auto& [key, _] : j.items()) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw ConfigError("unknown config key: " + key);
    }
    TrainConfig c;
    if (j.contains("lr")) j.at("lr").get_to(c.lr);
    if (j.contains("weight_decay")) j.at("weight_decay").get_to(c.weight_decay);
    if (j.contains("alpha")) j.at("alpha").get_to(c.alpha);
    if (j.contains("tau")) j.at("tau").get_to(c.tau);
    if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
    if (j.contains("hidden")) j.at("hidden").get_to(c.hidden);
    if (j.contains("dropout")) j.at("dropout").get_to(c.dropout);
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("train_ratio")) j.at("train_ratio").get_to(c.train_ratio);
    if (j.contains("cl_batch")) j.at("cl_batch").get_to(c.cl_batch);
    if (j.contains("d_e")) j.at("d_e").get_to(c.d_e);
    if (j.contains("no_tse")) j.at("no_tse").get_to(c.no_tse);
    if (j.contains("no_ggrl")) j.at("no_ggrl").get_to(c.no_ggrl);
    if (j.contains("no_cl")) j.at("no_cl").get_to(c.no_cl);
    if (j.contains("no_fusion")) j.at("no_fusion").get_to(c.no_fusion);
    if (j.contains("no_attrs")) j.at("no_attrs").get_to(c.no_attrs);
    if (j.contains("no_emb")) j.at("no_emb").get_to(c.no_emb);
    c.validate();
    return c;
}

inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("config not found: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("bad config json: " + std::string(e.what()));
    }
    return train_config_from_json(j);
}

struct EpochRow {
    int epoch = 0;
    double bce = 0.0, cl = 0.0, total = 0.0, val_auc = 0.0, val_f1 = 0.0;
};

struct MetricsReport {
    double f1 = 0.0, auc = 0.0, precision = 0.0, recall = 0.0, accuracy = 0.0;
    int best_epoch = 0;
    double best_val_auc = 0.0;
    std::vector<EpochRow> curve;
};

struct StepLosses {
    double bce = 0.0, cl = 0.0, total = 0.0;
};

namespace detail {

inline Rng view_rng(uint64_t seed, int epoch, size_t tribe, int view) {
    return Rng(Rng::key({seed, 0x76696577u, static_cast<uint64_t>(epoch),
                         static_cast<uint64_t>(tribe), static_cast<uint64_t>(view)}));
}

}  // namespace detail

// One full-graph gradient step at a fixed epoch index. All randomness
// (dropout masks, contrastive batching) is a pure function of (cfg.seed,
// epoch), so the computed loss and gradients are reproducible and
// thread-count independent. Tribe tapes are built twice — once for values,
// once for the backward pass — so at most one tribe tape per worker is
// alive at a time.
inline StepLosses train_step(const std::vector<TribeContext>& ctxs, const Tensor& attrs_std,
                             const std::vector<std::vector<int>>& global_adj, ModelParams& P,
                             const TrainConfig& cfg, const std::vector<int>& train_idx,
                             const std::vector<double>& labels, int epoch, int threads,
                             bool with_grads) {
    size_t n = ctxs.size();
    bool use_tse = !P.cfg.no_tse;
    bool use_cl = !P.cfg.no_cl && cfg.alpha > 0.0 && n >= 2;
    LossConfig lcfg = cfg.loss_config();

    // Phase 1: tribe forward values (query view, plus key view for the
    // contrastive term).
    Tensor Q(static_cast<int>(n), P.cfg.d_t), K;
    if (use_cl) K = Tensor(static_cast<int>(n), P.cfg.d_t);
    if (use_tse) {
        parallel_for(n, threads, [&](size_t i) {
            {
                Tape tp;
                Rng rng = detail::view_rng(cfg.seed, epoch, i, 0);
                Var r = tse_tribe_forward(tp, ctxs[i], P, &rng);
                const auto& v = tp.val(r);
                for (int j = 0; j < P.cfg.d_t; ++j) Q.at(static_cast<int>(i), j) = v[j];
            }
            if (use_cl) {
                Tape tp;
                Rng rng = detail::view_rng(cfg.seed, epoch, i, 1);
                Var r = tse_tribe_forward(tp, ctxs[i], P, &rng);
                const auto& v = tp.val(r);
                for (int j = 0; j < P.cfg.d_t; ++j) K.at(static_cast<int>(i), j) = v[j];
            }
        });
    }

    // Phase 2: the global tape (fusion, propagation, head, losses).
    Tape tp;
    Var q_in = tp.input(Q);
    Var k_in = use_cl ? tp.input(K) : -1;
    GlobalOut out = global_forward(tp, q_in, attrs_std, global_adj, P);
    Var bce = bce_loss(tp, out.probs, labels, train_idx, lcfg.clamp_eps);

    StepLosses losses;
    Var total = bce;
    if (use_cl) {
        Rng cl_rng(Rng::key({cfg.seed, 0x636c6261u, static_cast<uint64_t>(epoch)}));
        Var cl = infonce_batched(tp, q_in, k_in, lcfg, cfg.cl_batch, cl_rng);
        total = total_loss(tp, bce, cl, lcfg);
        losses.cl = tp.scalar(cl);
    }
    losses.bce = tp.scalar(bce);
    losses.total = tp.scalar(total);
    if (!with_grads) return losses;

    tp.backward(total);
    tp.apply_leaf_grads();

    // Phase 3: push the global tape's gradient at Q/K back through each
    // tribe's encoder. Per-tribe leaf grads are buffered and merged in
    // tribe order so the accumulation is identical at any thread count.
    if (use_tse) {
        const auto& dQ = tp.grad(q_in);
        const double* dK = use_cl ? tp.grad(k_in).data() : nullptr;
        std::vector<std::vector<std::pair<Param*, Tensor>>> buf(n);
        parallel_for(n, threads, [&](size_t i) {
            for (int view = 0; view < (use_cl ? 2 : 1); ++view) {
                Tape ttp;
                Rng rng = detail::view_rng(cfg.seed, epoch, i, view);
                Var r = tse_tribe_forward(ttp, ctxs[i], P, &rng);
                Tensor seed_grad(1, P.cfg.d_t);
                const double* src = view == 0 ? dQ.data() : dK;
                for (int j = 0; j < P.cfg.d_t; ++j)
                    seed_grad.at(0, j) = src[i * static_cast<size_t>(P.cfg.d_t) + j];
                ttp.backward_seeded(r, seed_grad);
                for (auto& [param, var] : ttp.leaves()) {
                    Tensor g(ttp.rows(var), ttp.cols(var));
                    g.data = ttp.grad(var);
                    buf[i].emplace_back(param, std::move(g));
                }
            }
        });
        for (size_t i = 0; i < n; ++i)
            for (auto& [param, g] : buf[i])
                for (size_t k = 0; k < g.data.size(); ++k) param->grad.data[k] += g.data[k];
    }
    return losses;
}

struct TrainResult {
    ModelParams params;  // best-validation-AUC checkpoint
    MetricsReport report;
};

inline BinaryMetrics metrics_on(const std::vector<double>& probs, const std::vector<int>& labels,
                                const std::vector<int>& idx) {
    std::vector<int> preds, y;
    preds.reserve(idx.size());
    y.reserve(idx.size());
    for (int i : idx) {
        preds.push_back(probs[i] >= 0.5 ? 1 : 0);
        y.push_back(labels[i]);
    }
    return classification_metrics(preds, y);
}

inline double auc_on(const std::vector<double>& probs, const std::vector<int>& labels,
                     const std::vector<int>& idx) {
    std::vector<double> s;
    std::vector<int> y;
    s.reserve(idx.size());
    y.reserve(idx.size());
    for (int i : idx) {
        s.push_back(probs[i]);
        y.push_back(labels[i]);
    }
    return compute_auc(s, y);
}

inline TrainResult train(const TribeStyleGraph& g, const TrainConfig& cfg, int threads = 1) {
    cfg.validate();
    validate_graph(g);

    ModelConfig mcfg = cfg.model_config(g.global.attr_dim());
    ModelParams P = ModelParams::init(mcfg, cfg.seed);
    Adam opt(P, cfg.lr, cfg.weight_decay);

    auto ctxs = make_tribe_contexts(g, threads);
    Tensor X = standardize_attrs(g.global);
    auto gadj = g.global.neighbor_lists();
    Split split = split_dataset(g.global.labels, cfg.train_ratio, cfg.seed);
    std::vector<double> ylab(g.global.labels.begin(), g.global.labels.end());

    TrainResult result;
    result.report.best_val_auc = -1.0;
    ModelParams best = P;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        P.zero_grads();
        StepLosses losses;
        try {
            losses = train_step(ctxs, X, gadj, P, cfg, split.train, ylab, epoch, threads, true);
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        opt.step(P);

        std::vector<double> probs = predict_eval(g, ctxs, P, threads);
        double val_auc = auc_on(probs, g.global.labels, split.val);
        BinaryMetrics val = metrics_on(probs, g.global.labels, split.val);
        result.report.curve.push_back(
            {epoch, losses.bce, losses.cl, losses.total, val_auc, val.f1});
        if (val_auc > result.report.best_val_auc) {
            result.report.best_val_auc = val_auc;
            result.report.best_epoch = epoch;
            best = P;
        }
    }

    std::vector<double> probs = predict_eval(g, ctxs, best, threads);
    BinaryMetrics test = metrics_on(probs, g.global.labels, split.test);
    result.report.f1 = test.f1;
    result.report.precision = test.precision;
    result.report.recall = test.recall;
    result.report.accuracy = test.accuracy;
    result.report.auc = auc_on(probs, g.global.labels, split.test);
    result.params = std::move(best);
    return result;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
    return nlohmann::json{{"f1", r.f1},
                          {"auc", r.auc},
                          {"precision", r.precision},
                          {"recall", r.recall},
                          {"accuracy", r.accuracy},
                          {"best_epoch", r.best_epoch},
                          {"best_val_auc", r.best_val_auc}};
}

inline void write_metrics_json(const std::string& path, const MetricsReport& r) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << metrics_to_json(r).dump(2) << "\n";
}

inline void write_epoch_csv(const std::string& path, const MetricsReport& r) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "epoch,bce,cl,total,val_auc,val_f1\n";
    for (const auto& row : r.curve)
        out << row.epoch << ',' << fmt_double(row.bce) << ',' << fmt_double(row.cl) << ','
            << fmt_double(row.total) << ',' << fmt_double(row.val_auc) << ','
            << fmt_double(row.val_f1) << "\n";
}

}  // namespace thgnn

#endif
