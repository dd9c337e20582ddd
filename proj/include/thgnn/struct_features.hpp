#ifndef THGNN_STRUCT_FEATURES_HPP
#define THGNN_STRUCT_FEATURES_HPP

#include <cmath>
#include <deque>
#include <vector>

#include "thgnn/graph.hpp"

namespace thgnn {

struct StructFeatureTable {
    std::vector<int> deg_in;
    std::vector<int> deg_out;
    std::vector<NodeKind> kind;
    std::vector<int> spd;
    std::vector<double> eig;
};

// BFS hop count to the central node over the undirected view.
inline std::vector<int> compute_spd(const Tribe& t) {
    auto nbr = undirected_view(t);
    std::vector<int> dist(t.size(), -1);
    std::deque<int> q{t.central};
    dist[t.central] = 0;
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        for (int u : nbr[v])
            if (dist[u] < 0) {
                dist[u] = dist[v] + 1;
                q.push_back(u);
            }
    }
    for (int d : dist)
        if (d < 0)
            throw InvariantViolation("tribe " + std::to_string(t.tribe_id) +
                                     ": disconnected node in compute_spd");
    return dist;
}

inline std::pair<std::vector<int>, std::vector<int>> compute_degrees(const Tribe& t) {
    std::vector<int> din(t.size(), 0), dout(t.size(), 0);
    for (auto [a, b] : t.edges) {
        ++dout[a];
        ++din[b];
    }
    return {din, dout};
}

// Unit-L2 principal eigenvector of the binary undirected adjacency matrix.
// Power iteration runs on A+I: same eigenvectors, but the top eigenvalue
// strictly dominates even on bipartite tribes (plain iteration on a star
// oscillates between the +sqrt(n-1) and -sqrt(n-1) components).
// Sign convention: the entry of largest magnitude is nonnegative.
// Edge-free tribes get the uniform vector 1/sqrt(n).
inline std::vector<double> compute_eigvec(const Tribe& t, double tol = 1e-10, int max_iter = 10000) {
    if (tol <= 0) throw ConfigError("compute_eigvec: tol must be positive");
    if (max_iter < 1) throw ConfigError("compute_eigvec: max_iter must be >= 1");
    int n = t.size();
    auto nbr = undirected_view(t);
    double uniform = 1.0 / std::sqrt(static_cast<double>(n));
    if (t.edges.empty()) return std::vector<double>(n, uniform);

    std::vector<double> x(n, uniform), y(n, 0.0);
    bool converged = false;
    for (int it = 0; it < max_iter && !converged; ++it) {
        for (int v = 0; v < n; ++v) {
            double s = x[v];  // the +I shift
            for (int u : nbr[v]) s += x[u];
            y[v] = s;
        }
        double norm = 0.0;
        for (double v : y) norm += v * v;
        norm = std::sqrt(norm);
        double diff = 0.0;
        for (int v = 0; v < n; ++v) {
            y[v] /= norm;
            diff = std::max(diff, std::fabs(y[v] - x[v]));
        }
        x = y;
        converged = diff < tol;
    }
    if (!converged)
        throw ConvergenceError("compute_eigvec: no convergence after " + std::to_string(max_iter) +
                               " iterations (tribe " + std::to_string(t.tribe_id) + ")");
    int argmax = 0;
    for (int v = 1; v < n; ++v)
        if (std::fabs(x[v]) > std::fabs(x[argmax])) argmax = v;
    if (x[argmax] < 0)
        for (double& v : x) v = -v;
    return x;
}

inline StructFeatureTable build_feature_table(const Tribe& t) {
    StructFeatureTable ft;
    auto [din, dout] = compute_degrees(t);
    ft.deg_in = std::move(din);
    ft.deg_out = std::move(dout);
    ft.kind = t.kinds;
    ft.spd = compute_spd(t);
    ft.eig = compute_eigvec(t);
    return ft;
}

}  // namespace thgnn

#endif
