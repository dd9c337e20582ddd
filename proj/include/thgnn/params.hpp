#ifndef THGNN_PARAMS_HPP
#define THGNN_PARAMS_HPP

#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thgnn/autodiff.hpp"
#include "thgnn/common.hpp"

namespace thgnn {

struct ModelConfig {
    int d_e = 16;        // width of each structural embedding table
    int d_t = 64;        // tribe representation width (GIN hidden/output)
    int hidden = 64;     // fused / global propagation width
    int gin_layers = 2;
    int ggrl_layers = 2;
    int attr_dim = 32;
    int b_deg = 12;      // log2 degree buckets
    int b_spd = 8;       // SPD clamp
    double dropout = 0.1;
    bool ggrl_relu = true;

    bool no_tse = false;
    bool no_ggrl = false;
    bool no_cl = false;
    bool no_fusion = false;
    bool no_attrs = false;
    bool no_emb = false;

    // width of the per-node input row fed to the first GIN layer
    int z_dim() const { return no_emb ? 5 : 4 * d_e + 1; }

    void validate() const {
        if (d_e < 1 || d_t < 1 || hidden < 1) throw ConfigError("model dims must be positive");
        if (gin_layers < 1 || ggrl_layers < 1) throw ConfigError("layer counts must be >= 1");
        if (attr_dim < 1) throw ConfigError("attr_dim must be positive");
        if (b_deg < 1 || b_spd < 1) throw ConfigError("bucket counts must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    }
};

struct GinLayer {
    Param eps;          // 1x1, layer output is MLP((1+eps)*h_v + sum of neighbors)
    Param w1, b1;       // first affine of the MLP
    Param w2, b2;       // second affine
};

struct ModelParams {
    ModelConfig cfg;

    Param deg_in_tab, deg_out_tab, kind_tab, spd_tab;
    Param proj0_w, proj0_b;           // embeds layer-0 input into d_t for the readout average
    std::vector<GinLayer> gin;

    Param w_g, w_x;                   // fusion projections (d_t x d, D x d)
    Param a_g, a_x;                   // attention vectors, stored as 2d x 1 columns

    std::vector<Param> ggrl_w;        // per-layer d x d
    Param head_w, head_b;             // d x 1, 1 x 1

    void for_each(const std::function<void(Param&)>& fn) {
        fn(deg_in_tab);
        fn(deg_out_tab);
        fn(kind_tab);
        fn(spd_tab);
        fn(proj0_w);
        fn(proj0_b);
        for (auto& l : gin) {
            fn(l.eps);
            fn(l.w1);
            fn(l.b1);
            fn(l.w2);
            fn(l.b2);
        }
        fn(w_g);
        fn(w_x);
        fn(a_g);
        fn(a_x);
        for (auto& w : ggrl_w) fn(w);
        fn(head_w);
        fn(head_b);
    }

    void zero_grads() {
        for_each([](Param& p) { p.zero_grad(); });
    }

    static ModelParams init(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        ModelParams P;
        P.cfg = cfg;
        Rng rng(Rng::key({seed, 0x70617261u}));

        auto xavier = [&rng](Param& p, const std::string& name, int r, int c) {
            p = Param(name, r, c);
            double bound = std::sqrt(6.0 / static_cast<double>(r + c));
            for (double& x : p.value.data) x = rng.uniform(-bound, bound);
        };
        auto table = [&rng](Param& p, const std::string& name, int r, int c) {
            p = Param(name, r, c);
            for (double& x : p.value.data) x = 0.02 * rng.normal();
        };
        auto zeros = [](Param& p, const std::string& name, int r, int c) { p = Param(name, r, c); };

        table(P.deg_in_tab, "tse.deg_in_table", cfg.b_deg, cfg.d_e);
        table(P.deg_out_tab, "tse.deg_out_table", cfg.b_deg, cfg.d_e);
        table(P.kind_tab, "tse.kind_table", 3, cfg.d_e);
        table(P.spd_tab, "tse.spd_table", cfg.b_spd, cfg.d_e);

        int z = cfg.z_dim();
        xavier(P.proj0_w, "tse.proj0.w", z, cfg.d_t);
        zeros(P.proj0_b, "tse.proj0.b", 1, cfg.d_t);

        P.gin.resize(cfg.gin_layers);
        for (int l = 0; l < cfg.gin_layers; ++l) {
            int in = l == 0 ? z : cfg.d_t;
            std::string pre = "tse.gin" + std::to_string(l);
            zeros(P.gin[l].eps, pre + ".eps", 1, 1);
            xavier(P.gin[l].w1, pre + ".w1", in, cfg.d_t);
            zeros(P.gin[l].b1, pre + ".b1", 1, cfg.d_t);
            xavier(P.gin[l].w2, pre + ".w2", cfg.d_t, cfg.d_t);
            zeros(P.gin[l].b2, pre + ".b2", 1, cfg.d_t);
        }

        int d = cfg.hidden;
        xavier(P.w_g, "fusion.w_g", cfg.d_t, d);
        xavier(P.w_x, "fusion.w_x", cfg.attr_dim, d);
        xavier(P.a_g, "fusion.a_g", 2 * d, 1);
        xavier(P.a_x, "fusion.a_x", 2 * d, 1);

        P.ggrl_w.resize(cfg.ggrl_layers);
        for (int l = 0; l < cfg.ggrl_layers; ++l)
            xavier(P.ggrl_w[l], "ggrl.w" + std::to_string(l), d, d);
        xavier(P.head_w, "head.w", d, 1);
        zeros(P.head_b, "head.b", 1, 1);
        return P;
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"d_e", c.d_e},
                       {"d_t", c.d_t},
                       {"hidden", c.hidden},
                       {"gin_layers", c.gin_layers},
                       {"ggrl_layers", c.ggrl_layers},
                       {"attr_dim", c.attr_dim},
                       {"b_deg", c.b_deg},
                       {"b_spd", c.b_spd},
                       {"dropout", c.dropout},
                       {"ggrl_relu", c.ggrl_relu},
                       {"no_tse", c.no_tse},
                       {"no_ggrl", c.no_ggrl},
                       {"no_cl", c.no_cl},
                       {"no_fusion", c.no_fusion},
                       {"no_attrs", c.no_attrs},
                       {"no_emb", c.no_emb}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("d_e").get_to(c.d_e);
    j.at("d_t").get_to(c.d_t);
    j.at("hidden").get_to(c.hidden);
    j.at("gin_layers").get_to(c.gin_layers);
    j.at("ggrl_layers").get_to(c.ggrl_layers);
    j.at("attr_dim").get_to(c.attr_dim);
    j.at("b_deg").get_to(c.b_deg);
    j.at("b_spd").get_to(c.b_spd);
    j.at("dropout").get_to(c.dropout);
    j.at("ggrl_relu").get_to(c.ggrl_relu);
    j.at("no_tse").get_to(c.no_tse);
    j.at("no_ggrl").get_to(c.no_ggrl);
    j.at("no_cl").get_to(c.no_cl);
    j.at("no_fusion").get_to(c.no_fusion);
    j.at("no_attrs").get_to(c.no_attrs);
    j.at("no_emb").get_to(c.no_emb);
}

// Checkpoint: JSON container mapping parameter name -> shape -> row-major values.
inline void save_checkpoint(const std::string& path, ModelParams& P) {
    nlohmann::json j;
    j["format"] = "tribe-gnn-checkpoint-v1";
    j["config"] = P.cfg;
    nlohmann::json params = nlohmann::json::object();
    P.for_each([&params](Param& p) {
        params[p.name] = {{"rows", p.value.rows}, {"cols", p.value.cols}, {"data", p.value.data}};
    });
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << j.dump();
    if (!out) throw IoError("short write: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("checkpoint not found: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("bad checkpoint json: " + std::string(e.what()));
    }
    if (j.value("format", "") != "tribe-gnn-checkpoint-v1")
        throw ParseError("unrecognized checkpoint format in " + path);
    ModelConfig cfg = j.at("config").get<ModelConfig>();
    ModelParams P = ModelParams::init(cfg, 0);
    const auto& params = j.at("params");
    P.for_each([&params, &path](Param& p) {
        if (!params.contains(p.name)) throw ParseError("checkpoint missing parameter " + p.name);
        const auto& e = params.at(p.name);
        int r = e.at("rows").get<int>(), c = e.at("cols").get<int>();
        if (r != p.value.rows || c != p.value.cols)
            throw ShapeError("checkpoint shape mismatch for " + p.name + " in " + path);
        e.at("data").get_to(p.value.data);
        if (p.value.data.size() != static_cast<size_t>(r) * c)
            throw ParseError("checkpoint data length mismatch for " + p.name);
    });
    return P;
}

}  // namespace thgnn

#endif
