#ifndef THGNN_GRAPH_HPP
#define THGNN_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "thgnn/common.hpp"
#include "thgnn/csv.hpp"

namespace thgnn {

enum class NodeKind : int { ListedCompany = 0, UnlistedCompany = 1, Individual = 2 };

// Local directed investment graph around one listed company.
// Edge (a,b) means a invests in b.
struct Tribe {
    int tribe_id = 0;
    std::vector<NodeKind> kinds;
    std::vector<std::pair<int, int>> edges;
    int central = 0;

    int size() const { return static_cast<int>(kinds.size()); }

    bool operator==(const Tribe&) const = default;
};

struct GlobalGraph {
    int n_central = 0;
    std::vector<std::pair<int, int>> edges;  // undirected, stored a < b, deduplicated
    std::vector<std::vector<double>> attrs;  // n_central rows, D columns
    std::vector<int> labels;                 // 0, 1 or -1 for unlabeled

    int attr_dim() const { return attrs.empty() ? 0 : static_cast<int>(attrs[0].size()); }

    std::vector<std::vector<int>> neighbor_lists() const {
        std::vector<std::vector<int>> nbr(n_central);
        for (auto [a, b] : edges) {
            nbr[a].push_back(b);
            nbr[b].push_back(a);
        }
        return nbr;
    }

    bool operator==(const GlobalGraph&) const = default;
};

struct TribeStyleGraph {
    GlobalGraph global;
    std::vector<Tribe> tribes;

    bool operator==(const TribeStyleGraph&) const = default;
};

// Symmetric neighbor lists over the directed edge list; duplicates merged.
inline std::vector<std::vector<int>> undirected_view(const Tribe& t) {
    std::vector<std::set<int>> sets(t.kinds.size());
    for (auto [a, b] : t.edges) {
        sets[a].insert(b);
        sets[b].insert(a);
    }
    std::vector<std::vector<int>> nbr(t.kinds.size());
    for (size_t i = 0; i < sets.size(); ++i) nbr[i].assign(sets[i].begin(), sets[i].end());
    return nbr;
}

inline void validate_tribe(const Tribe& t) {
    const std::string tag = "tribe " + std::to_string(t.tribe_id);
    int n = t.size();
    if (n == 0) throw InvariantViolation(tag + ": empty");
    if (t.central < 0 || t.central >= n)
        throw InvariantViolation(tag + ": central id " + std::to_string(t.central) + " out of range");
    int listed = 0;
    for (int i = 0; i < n; ++i)
        if (t.kinds[i] == NodeKind::ListedCompany) ++listed;
    if (listed != 1)
        throw InvariantViolation(tag + ": has " + std::to_string(listed) + " listed-company nodes, expected 1");
    if (t.kinds[t.central] != NodeKind::ListedCompany)
        throw InvariantViolation(tag + ": central node " + std::to_string(t.central) + " is not a listed company");
    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : t.edges) {
        if (a < 0 || a >= n || b < 0 || b >= n)
            throw InvariantViolation(tag + ": edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range");
        if (a == b)
            throw InvariantViolation(tag + ": self-loop at node " + std::to_string(a));
        if (!seen.insert({a, b}).second)
            throw InvariantViolation(tag + ": duplicate edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
    }
    // connectivity around the center, undirected view
    auto nbr = undirected_view(t);
    std::vector<char> vis(n, 0);
    std::vector<int> stack{t.central};
    vis[t.central] = 1;
    int cnt = 0;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        ++cnt;
        for (int u : nbr[v])
            if (!vis[u]) {
                vis[u] = 1;
                stack.push_back(u);
            }
    }
    if (cnt != n) throw InvariantViolation(tag + ": disconnected from central node (" +
                                           std::to_string(n - cnt) + " unreachable nodes)");
}

inline void validate_graph(const TribeStyleGraph& g) {
    int n = g.global.n_central;
    if (static_cast<int>(g.tribes.size()) != n)
        throw InvariantViolation("tribe count " + std::to_string(g.tribes.size()) +
                                 " != n_central " + std::to_string(n));
    if (static_cast<int>(g.global.attrs.size()) != n)
        throw InvariantViolation("attrs row count " + std::to_string(g.global.attrs.size()) +
                                 " != n_central " + std::to_string(n));
    if (static_cast<int>(g.global.labels.size()) != n)
        throw InvariantViolation("label count != n_central");
    size_t d = g.global.attrs.empty() ? 0 : g.global.attrs[0].size();
    for (int i = 0; i < n; ++i) {
        if (g.global.attrs[i].size() != d)
            throw InvariantViolation("attrs row " + std::to_string(i) + ": ragged width");
        for (double v : g.global.attrs[i])
            if (!std::isfinite(v))
                throw InvariantViolation("attrs row " + std::to_string(i) + ": non-finite value");
        if (g.global.labels[i] != -1 && g.global.labels[i] != 0 && g.global.labels[i] != 1)
            throw InvariantViolation("label of node " + std::to_string(i) + " not in {-1,0,1}");
    }
    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : g.global.edges) {
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw InvariantViolation("global edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range");
        if (a == b) throw InvariantViolation("global self-loop at " + std::to_string(a));
        if (a >= b) throw InvariantViolation("global edge (" + std::to_string(a) + "," + std::to_string(b) +
                                             ") not stored with a < b");
        if (!seen.insert({a, b}).second)
            throw InvariantViolation("duplicate global edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
    }
    for (int i = 0; i < n; ++i) {
        if (g.tribes[i].tribe_id != i)
            throw InvariantViolation("tribes[" + std::to_string(i) + "] has tribe_id " +
                                     std::to_string(g.tribes[i].tribe_id));
        validate_tribe(g.tribes[i]);
    }
}

inline void save_graph(const TribeStyleGraph& g, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw IoError("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("global_nodes.csv");
        f << "central_id,label\n";
        for (int i = 0; i < g.global.n_central; ++i) f << i << ',' << g.global.labels[i] << '\n';
    }
    {
        auto f = open("global_edges.csv");
        f << "src,dst\n";
        for (auto [a, b] : g.global.edges) f << a << ',' << b << '\n';
    }
    {
        auto f = open("attrs.csv");
        f << "central_id";
        for (int j = 0; j < g.global.attr_dim(); ++j) f << ",f" << j;
        f << '\n';
        for (int i = 0; i < g.global.n_central; ++i) {
            f << i;
            for (double v : g.global.attrs[i]) f << ',' << fmt_double(v);
            f << '\n';
        }
    }
    {
        auto f = open("tribe_nodes.csv");
        f << "tribe_id,local_id,kind,is_central\n";
        for (const auto& t : g.tribes)
            for (int j = 0; j < t.size(); ++j)
                f << t.tribe_id << ',' << j << ',' << static_cast<int>(t.kinds[j]) << ','
                  << (j == t.central ? 1 : 0) << '\n';
    }
    {
        auto f = open("tribe_edges.csv");
        f << "tribe_id,src_local,dst_local\n";
        for (const auto& t : g.tribes)
            for (auto [a, b] : t.edges) f << t.tribe_id << ',' << a << ',' << b << '\n';
    }
}

inline TribeStyleGraph load_graph(const std::filesystem::path& dir) {
    TribeStyleGraph g;
    auto nodes = read_csv(dir / "global_nodes.csv");
    {
        int c_id = nodes.col("central_id"), c_lab = nodes.col("label");
        g.global.n_central = static_cast<int>(nodes.rows.size());
        g.global.labels.resize(g.global.n_central);
        for (size_t r = 0; r < nodes.rows.size(); ++r) {
            auto id = parse_int(nodes, r, c_id);
            if (id != static_cast<int64_t>(r))
                throw ParseError(nodes.path + " line " + std::to_string(r + 2) +
                                 ": central ids must be 0..N-1 in order");
            g.global.labels[r] = static_cast<int>(parse_int(nodes, r, c_lab));
        }
    }
    {
        auto t = read_csv(dir / "global_edges.csv");
        int cs = t.col("src"), cd = t.col("dst");
        for (size_t r = 0; r < t.rows.size(); ++r)
            g.global.edges.emplace_back(static_cast<int>(parse_int(t, r, cs)),
                                        static_cast<int>(parse_int(t, r, cd)));
    }
    {
        auto t = read_csv(dir / "attrs.csv");
        int c_id = t.col("central_id");
        int d = static_cast<int>(t.header.size()) - 1;
        g.global.attrs.assign(g.global.n_central, std::vector<double>(d, 0.0));
        if (static_cast<int>(t.rows.size()) != g.global.n_central)
            throw InvariantViolation(t.path + ": row count != n_central");
        for (size_t r = 0; r < t.rows.size(); ++r) {
            int id = static_cast<int>(parse_int(t, r, c_id));
            if (id < 0 || id >= g.global.n_central)
                throw ParseError(t.path + " line " + std::to_string(r + 2) + ": bad central_id");
            for (int j = 0; j < d; ++j) g.global.attrs[id][j] = parse_double(t, r, t.col("f" + std::to_string(j)));
        }
    }
    g.tribes.resize(g.global.n_central);
    for (int i = 0; i < g.global.n_central; ++i) g.tribes[i].tribe_id = i;
    {
        auto t = read_csv(dir / "tribe_nodes.csv");
        int c_t = t.col("tribe_id"), c_l = t.col("local_id"), c_k = t.col("kind"), c_c = t.col("is_central");
        for (size_t r = 0; r < t.rows.size(); ++r) {
            int ti = static_cast<int>(parse_int(t, r, c_t));
            int li = static_cast<int>(parse_int(t, r, c_l));
            int k = static_cast<int>(parse_int(t, r, c_k));
            int ic = static_cast<int>(parse_int(t, r, c_c));
            if (ti < 0 || ti >= g.global.n_central)
                throw ParseError(t.path + " line " + std::to_string(r + 2) + ": bad tribe_id");
            if (k < 0 || k > 2)
                throw ParseError(t.path + " line " + std::to_string(r + 2) + ": bad kind");
            auto& tribe = g.tribes[ti];
            if (li != tribe.size())
                throw ParseError(t.path + " line " + std::to_string(r + 2) +
                                 ": local ids of a tribe must be 0..n-1 in order");
            tribe.kinds.push_back(static_cast<NodeKind>(k));
            if (ic) tribe.central = li;
        }
    }
    {
        auto t = read_csv(dir / "tribe_edges.csv");
        int c_t = t.col("tribe_id"), c_s = t.col("src_local"), c_d = t.col("dst_local");
        for (size_t r = 0; r < t.rows.size(); ++r) {
            int ti = static_cast<int>(parse_int(t, r, c_t));
            if (ti < 0 || ti >= g.global.n_central)
                throw ParseError(t.path + " line " + std::to_string(r + 2) + ": bad tribe_id");
            g.tribes[ti].edges.emplace_back(static_cast<int>(parse_int(t, r, c_s)),
                                            static_cast<int>(parse_int(t, r, c_d)));
        }
    }
    validate_graph(g);
    return g;
}

}  // namespace thgnn

#endif
