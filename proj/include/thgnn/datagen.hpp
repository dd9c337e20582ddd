#ifndef THGNN_DATAGEN_HPP
#define THGNN_DATAGEN_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "thgnn/common.hpp"
#include "thgnn/graph.hpp"
#include "thgnn/struct_features.hpp"

namespace thgnn {

struct GenConfig {
    int n_tribes = 400;
    double risky_fraction = 0.42;
    std::pair<int, int> tribe_size_risky = {120, 150};
    std::pair<int, int> tribe_size_normal = {88, 108};
    // probability a joining *company* attaches only to the center; individuals
    // always do (they hold no portfolio of their own)
    double star_bias_risky = 0.076;
    double star_bias_normal = 0.877;
    double individual_fraction_risky = 0.60;
    double individual_fraction_normal = 0.306;
    double p_same = 0.01;   // global edge probability, same-label pair
    double p_cross = 0.002;
    int attr_dim = 32;
    double attr_signal = 0.3;  // fraction of attribute variance carried by the label
    int bins = 50;
    uint64_t seed = 7;

    void validate() const {
        if (n_tribes < 1) throw ConfigError("n_tribes must be >= 1");
        if (risky_fraction < 0.0 || risky_fraction > 1.0)
            throw ConfigError("risky_fraction must be in [0,1]");
        for (auto [lo, hi] : {tribe_size_risky, tribe_size_normal}) {
            if (lo < 1) throw ConfigError("tribe_size min must be >= 1");
            if (hi < lo) throw ConfigError("tribe_size max must be >= min");
        }
        for (double p : {star_bias_risky, star_bias_normal, individual_fraction_risky,
                         individual_fraction_normal, p_same, p_cross})
            if (p < 0.0 || p > 1.0) throw ConfigError("probabilities must be in [0,1]");
        if (p_same < p_cross) throw ConfigError("homophilous benchmark needs p_same >= p_cross");
        if (attr_dim < 1) throw ConfigError("attr_dim must be >= 1");
        if (attr_signal < 0.0 || attr_signal > 1.0)
            throw ConfigError("attr_signal must be in [0,1]");
        if (bins < 2) throw ConfigError("bins must be >= 2");
    }
};

// The standard synthetic benchmark.
inline GenConfig bench_small() { return GenConfig{}; }

// Signal-free control: identical class mechanisms, label-independent attributes.
inline GenConfig null_config() {
    GenConfig c;
    c.tribe_size_risky = c.tribe_size_normal = {88, 108};
    c.star_bias_risky = c.star_bias_normal = 0.45;
    c.individual_fraction_risky = c.individual_fraction_normal = 0.45;
    c.p_same = c.p_cross = 0.006;
    c.attr_signal = 0.0;
    return c;
}

inline void to_json(nlohmann::json& j, const GenConfig& c) {
    j = nlohmann::json{{"n_tribes", c.n_tribes},
                       {"risky_fraction", c.risky_fraction},
                       {"tribe_size_risky", {c.tribe_size_risky.first, c.tribe_size_risky.second}},
                       {"tribe_size_normal", {c.tribe_size_normal.first, c.tribe_size_normal.second}},
                       {"star_bias_risky", c.star_bias_risky},
                       {"star_bias_normal", c.star_bias_normal},
                       {"individual_fraction_risky", c.individual_fraction_risky},
                       {"individual_fraction_normal", c.individual_fraction_normal},
                       {"p_same", c.p_same},
                       {"p_cross", c.p_cross},
                       {"attr_dim", c.attr_dim},
                       {"attr_signal", c.attr_signal},
                       {"bins", c.bins},
                       {"seed", c.seed}};
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "n_tribes",       "risky_fraction",   "tribe_size_risky", "tribe_size_normal",
        "star_bias_risky", "star_bias_normal", "individual_fraction_risky",
        "individual_fraction_normal", "p_same", "p_cross", "attr_dim", "attr_signal",
        "bins",           "seed"};
    for (auto& [key, _] : j.items()) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw ConfigError("unknown config key: " + key);
    }
    GenConfig c;
    auto pair_of = [](const nlohmann::json& e) {
        if (!e.is_array() || e.size() != 2) throw ConfigError("tribe_size must be [min,max]");
        return std::pair<int, int>{e[0].get<int>(), e[1].get<int>()};
    };
    if (j.contains("n_tribes")) j.at("n_tribes").get_to(c.n_tribes);
    if (j.contains("risky_fraction")) j.at("risky_fraction").get_to(c.risky_fraction);
    if (j.contains("tribe_size_risky")) c.tribe_size_risky = pair_of(j.at("tribe_size_risky"));
    if (j.contains("tribe_size_normal")) c.tribe_size_normal = pair_of(j.at("tribe_size_normal"));
    if (j.contains("star_bias_risky")) j.at("star_bias_risky").get_to(c.star_bias_risky);
    if (j.contains("star_bias_normal")) j.at("star_bias_normal").get_to(c.star_bias_normal);
    if (j.contains("individual_fraction_risky"))
        j.at("individual_fraction_risky").get_to(c.individual_fraction_risky);
    if (j.contains("individual_fraction_normal"))
        j.at("individual_fraction_normal").get_to(c.individual_fraction_normal);
    if (j.contains("p_same")) j.at("p_same").get_to(c.p_same);
    if (j.contains("p_cross")) j.at("p_cross").get_to(c.p_cross);
    if (j.contains("attr_dim")) j.at("attr_dim").get_to(c.attr_dim);
    if (j.contains("attr_signal")) j.at("attr_signal").get_to(c.attr_signal);
    if (j.contains("bins")) j.at("bins").get_to(c.bins);
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    c.validate();
    return c;
}

inline GenConfig load_gen_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("config not found: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("bad config json: " + std::string(e.what()));
    }
    return gen_config_from_json(j);
}

namespace detail {

// Grows one tribe node by node. Joining companies either attach only to the
// center (star move) or to the center plus two existing companies (dense
// move, closing triangles). Individuals always make the star move.
inline Tribe grow_tribe(int tribe_id, int size, double star_bias, double individual_fraction,
                        Rng& rng) {
    Tribe t;
    t.tribe_id = tribe_id;
    t.central = 0;
    t.kinds.push_back(NodeKind::ListedCompany);
    std::vector<int> companies;  // non-individual, non-center nodes
    for (int j = 1; j < size; ++j) {
        bool individual = rng.uniform() < individual_fraction;
        t.kinds.push_back(individual ? NodeKind::Individual : NodeKind::UnlistedCompany);
        bool star = individual || rng.uniform() < star_bias || companies.size() < 2;
        t.edges.emplace_back(j, 0);  // investor -> investee
        if (!star) {
            int a = companies[rng.uniform_int(0, static_cast<int>(companies.size()) - 1)];
            int b = companies[rng.uniform_int(0, static_cast<int>(companies.size()) - 1)];
            t.edges.emplace_back(j, a);
            if (b != a) t.edges.emplace_back(j, b);
        }
        if (!individual) companies.push_back(j);
    }
    return t;
}

}  // namespace detail

inline TribeStyleGraph generate(const GenConfig& cfg) {
    cfg.validate();
    TribeStyleGraph g;
    int n = cfg.n_tribes;
    g.global.n_central = n;

    g.global.labels.assign(n, 0);
    int n_risky = static_cast<int>(std::llround(cfg.risky_fraction * n));
    for (int i = 0; i < n_risky; ++i) g.global.labels[i] = 1;
    {
        Rng rng(Rng::key({cfg.seed, 0x6c61626cu}));
        rng.shuffle(g.global.labels);
    }

    g.tribes.resize(n);
    for (int i = 0; i < n; ++i) {
        bool risky = g.global.labels[i] == 1;
        Rng rng(Rng::key({cfg.seed, 0x74726962u, static_cast<uint64_t>(i)}));
        auto [lo, hi] = risky ? cfg.tribe_size_risky : cfg.tribe_size_normal;
        int size = rng.uniform_int(lo, hi);
        g.tribes[i] = detail::grow_tribe(
            i, size, risky ? cfg.star_bias_risky : cfg.star_bias_normal,
            risky ? cfg.individual_fraction_risky : cfg.individual_fraction_normal, rng);
    }

    {
        Rng rng(Rng::key({cfg.seed, 0x676c6f62u}));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double p = g.global.labels[i] == g.global.labels[j] ? cfg.p_same : cfg.p_cross;
                if (rng.uniform() < p) g.global.edges.emplace_back(i, j);
            }
    }

    // Attributes: label-dependent mean on orthogonal supports plus noise,
    // then equal-width binning per column (bin index is the stored value).
    std::vector<std::vector<double>> raw(n, std::vector<double>(cfg.attr_dim));
    for (int i = 0; i < n; ++i) {
        Rng rng(Rng::key({cfg.seed, 0x61747472u, static_cast<uint64_t>(i)}));
        bool risky = g.global.labels[i] == 1;
        for (int d = 0; d < cfg.attr_dim; ++d) {
            bool on = (d % 2 == 0) == risky;  // risky mean on even dims, normal on odd
            raw[i][d] = cfg.attr_signal * (on ? 1.0 : 0.0) +
                        (1.0 - cfg.attr_signal) * rng.normal();
        }
    }
    g.global.attrs.assign(n, std::vector<double>(cfg.attr_dim));
    for (int d = 0; d < cfg.attr_dim; ++d) {
        double lo = raw[0][d], hi = raw[0][d];
        for (int i = 1; i < n; ++i) {
            lo = std::min(lo, raw[i][d]);
            hi = std::max(hi, raw[i][d]);
        }
        double width = hi > lo ? (hi - lo) / cfg.bins : 1.0;
        for (int i = 0; i < n; ++i) {
            int b = static_cast<int>((raw[i][d] - lo) / width);
            g.global.attrs[i][d] = static_cast<double>(std::min(b, cfg.bins - 1));
        }
    }

    validate_graph(g);
    return g;
}

struct TribeStats {
    double degree_centrality = 0.0;
    double eigenvector_centrality = 0.0;
    double clustering_coefficient = 0.0;
    int n_bridges = 0;
    int central_degree = 0;
};

// Bridge edges of an undirected graph by the low-link algorithm (iterative).
inline int count_bridges(const std::vector<std::vector<int>>& adj) {
    int n = static_cast<int>(adj.size());
    std::vector<int> disc(n, -1), low(n, 0);
    int timer = 0, bridges = 0;
    struct Frame {
        int v, parent;
        size_t next = 0;
    };
    for (int root = 0; root < n; ++root) {
        if (disc[root] != -1) continue;
        std::vector<Frame> stack{{root, -1}};
        disc[root] = low[root] = timer++;
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < adj[f.v].size()) {
                int u = adj[f.v][f.next++];
                if (disc[u] == -1) {
                    disc[u] = low[u] = timer++;
                    stack.push_back({u, f.v});
                } else if (u != f.parent) {
                    low[f.v] = std::min(low[f.v], disc[u]);
                }
            } else {
                int v = f.v, p = f.parent;
                stack.pop_back();
                if (p != -1) {
                    low[p] = std::min(low[p], low[v]);
                    if (low[v] > disc[p]) ++bridges;
                }
            }
        }
    }
    return bridges;
}

inline double local_clustering(const std::vector<std::vector<int>>& adj, int v) {
    size_t k = adj[v].size();
    if (k < 2) return 0.0;
    int links = 0;
    for (size_t a = 0; a < k; ++a)
        for (size_t b = a + 1; b < k; ++b) {
            int u = adj[v][a], w = adj[v][b];
            for (int x : adj[u])
                if (x == w) {
                    ++links;
                    break;
                }
        }
    return 2.0 * links / (static_cast<double>(k) * (k - 1));
}

inline TribeStats analyze_tribe(const Tribe& t) {
    TribeStats s;
    int n = t.size();
    if (n == 1) return s;  // all metrics 0 by convention
    auto adj = undirected_view(t);
    double deg_sum = 0.0, clust_sum = 0.0;
    for (int v = 0; v < n; ++v) {
        deg_sum += static_cast<double>(adj[v].size()) / (n - 1);
        clust_sum += local_clustering(adj, v);
    }
    s.degree_centrality = deg_sum / n;
    s.clustering_coefficient = clust_sum / n;
    std::vector<double> eig = compute_eigvec(t, 1e-10, 10000);
    double eig_sum = 0.0;
    for (double e : eig) eig_sum += e;
    s.eigenvector_centrality = eig_sum / n;
    s.n_bridges = count_bridges(adj);
    s.central_degree = static_cast<int>(adj[t.central].size());
    return s;
}

struct NeighborRiskHistogram {
    // per-class mass over 10 risky-neighbor-proportion bins, each row sums to 1
    std::vector<double> risky = std::vector<double>(10, 0.0);
    std::vector<double> normal = std::vector<double>(10, 0.0);
};

// Fraction of risky global neighbors per central node, bucketed into deciles
// and normalized per class; isolated nodes are ignored.
inline NeighborRiskHistogram neighbor_risk_histogram(const TribeStyleGraph& g) {
    auto adj = g.global.neighbor_lists();
    NeighborRiskHistogram h;
    double n_risky = 0.0, n_normal = 0.0;
    for (int v = 0; v < g.global.n_central; ++v) {
        if (adj[v].empty()) continue;
        int risky_nbrs = 0;
        for (int u : adj[v]) risky_nbrs += g.global.labels[u];
        double frac = static_cast<double>(risky_nbrs) / adj[v].size();
        int bin = std::min(static_cast<int>(frac * 10.0), 9);
        if (g.global.labels[v] == 1) {
            h.risky[bin] += 1.0;
            n_risky += 1.0;
        } else {
            h.normal[bin] += 1.0;
            n_normal += 1.0;
        }
    }
    if (n_risky == 0.0 && n_normal == 0.0)
        throw InvariantViolation("neighbor_risk_histogram: global graph has no edges");
    for (double& x : h.risky) x = n_risky > 0.0 ? x / n_risky : 0.0;
    for (double& x : h.normal) x = n_normal > 0.0 ? x / n_normal : 0.0;
    return h;
}

}  // namespace thgnn

#endif
