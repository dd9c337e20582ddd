// Command-line entry point: generate / stats / train / eval / embed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thgnn/datagen.hpp"
#include "thgnn/graph.hpp"
#include "thgnn/model.hpp"
#include "thgnn/params.hpp"
#include "thgnn/training.hpp"

namespace fs = std::filesystem;
using namespace thgnn;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void apply_ablations(const std::vector<std::string>& ablations, TrainConfig& cfg) {
    for (const auto& a : ablations) {
        if (a == "tse") cfg.no_tse = true;
        else if (a == "ggrl") cfg.no_ggrl = true;
        else if (a == "cl") cfg.no_cl = true;
        else if (a == "fusion") cfg.no_fusion = true;
        else if (a == "attrs") cfg.no_attrs = true;
        else if (a == "emb") cfg.no_emb = true;
        else throw ConfigError("unknown ablation: " + a);
    }
}

void cmd_generate(const std::string& config_path, const std::string& out_dir, long long seed) {
    GenConfig cfg = config_path.empty() ? bench_small() : load_gen_config(config_path);
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    TribeStyleGraph g = generate(cfg);
    save_graph(g, out_dir);
    size_t nodes = 0, edges = 0;
    for (const auto& t : g.tribes) {
        nodes += t.kinds.size();
        edges += t.edges.size();
    }
    std::cout << "generated " << g.tribes.size() << " tribes (" << nodes << " nodes, " << edges
              << " tribe edges, " << g.global.edges.size() << " global edges) -> " << out_dir
              << "\n";
}

void cmd_stats(const std::string& graph_dir, const std::string& out_dir, bool features) {
    TribeStyleGraph g = load_graph(graph_dir);
    fs::create_directories(out_dir);

    std::ofstream per((fs::path(out_dir) / "tribe_stats.csv").string());
    if (!per) throw IoError("cannot write tribe_stats.csv");
    per << "tribe_id,label,degree_centrality,eigenvector_centrality,clustering_coefficient,"
           "n_bridges,central_degree\n";
    std::vector<double> sums[2][5];
    int counts[2] = {0, 0};
    for (const auto& t : g.tribes) {
        TribeStats s = analyze_tribe(t);
        int lab = g.global.labels[t.tribe_id];
        per << t.tribe_id << ',' << lab << ',' << fmt_double(s.degree_centrality) << ','
            << fmt_double(s.eigenvector_centrality) << ',' << fmt_double(s.clustering_coefficient)
            << ',' << s.n_bridges << ',' << s.central_degree << "\n";
        double vals[5] = {s.degree_centrality, s.eigenvector_centrality,
                          s.clustering_coefficient, static_cast<double>(s.n_bridges),
                          static_cast<double>(s.central_degree)};
        for (int m = 0; m < 5; ++m) sums[lab][m].push_back(vals[m]);
        ++counts[lab];
    }

    std::ofstream cls((fs::path(out_dir) / "class_summary.csv").string());
    if (!cls) throw IoError("cannot write class_summary.csv");
    cls << "class,n_tribes,degree_centrality,eigenvector_centrality,clustering_coefficient,"
           "n_bridges,central_degree\n";
    for (int lab : {1, 0}) {
        cls << (lab == 1 ? "risky" : "normal") << ',' << counts[lab];
        for (int m = 0; m < 5; ++m) {
            double mean = 0.0;
            for (double v : sums[lab][m]) mean += v;
            if (counts[lab] > 0) mean /= counts[lab];
            cls << ',' << fmt_double(mean);
        }
        cls << "\n";
    }

    NeighborRiskHistogram h = neighbor_risk_histogram(g);
    std::ofstream hist((fs::path(out_dir) / "neighbor_hist.csv").string());
    if (!hist) throw IoError("cannot write neighbor_hist.csv");
    hist << "bin_low,bin_high,risky_mass,normal_mass\n";
    for (int b = 0; b < 10; ++b)
        hist << fmt_double(b / 10.0) << ',' << fmt_double((b + 1) / 10.0) << ','
             << fmt_double(h.risky[b]) << ',' << fmt_double(h.normal[b]) << "\n";

    if (features) {
        std::ofstream ft((fs::path(out_dir) / "features.csv").string());
        if (!ft) throw IoError("cannot write features.csv");
        ft << "tribe_id,local_id,deg_in,deg_out,kind,spd,eig\n";
        for (const auto& t : g.tribes) {
            StructFeatureTable table = build_feature_table(t);
            for (int v = 0; v < t.size(); ++v)
                ft << t.tribe_id << ',' << v << ',' << table.deg_in[v] << ',' << table.deg_out[v]
                   << ',' << static_cast<int>(table.kind[v]) << ',' << table.spd[v] << ','
                   << fmt_double(table.eig[v]) << "\n";
        }
    }
    std::cout << "stats for " << g.tribes.size() << " tribes -> " << out_dir << "\n";
}

void cmd_train(const std::string& graph_dir, const std::string& config_path,
               const std::string& out_dir, long long seed, int threads,
               const std::vector<std::string>& ablations) {
    TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    apply_ablations(ablations, cfg);
    cfg.validate();

    TribeStyleGraph g = load_graph(graph_dir);
    TrainResult res = train(g, cfg, threads);

    fs::create_directories(out_dir);
    write_metrics_json((fs::path(out_dir) / "metrics.json").string(), res.report);
    write_epoch_csv((fs::path(out_dir) / "epochs.csv").string(), res.report);
    save_checkpoint((fs::path(out_dir) / "checkpoint.json").string(), res.params);
    std::cout << "test f1=" << res.report.f1 << " auc=" << res.report.auc << " (best epoch "
              << res.report.best_epoch << ", val auc " << res.report.best_val_auc << ") -> "
              << out_dir << "\n";
}

void cmd_eval(const std::string& graph_dir, const std::string& ckpt, const std::string& out_path,
              int threads) {
    TribeStyleGraph g = load_graph(graph_dir);
    ModelParams P = load_checkpoint(ckpt);
    if (P.cfg.attr_dim != g.global.attr_dim())
        throw ShapeError("checkpoint attr_dim does not match graph");
    auto ctxs = make_tribe_contexts(g, threads);
    std::vector<double> probs = predict_eval(g, ctxs, P, threads);

    std::vector<int> preds, all(g.global.n_central);
    for (int i = 0; i < g.global.n_central; ++i) all[i] = i;
    BinaryMetrics m = metrics_on(probs, g.global.labels, all);
    double auc = auc_on(probs, g.global.labels, all);
    nlohmann::json j{{"f1", m.f1},
                     {"auc", auc},
                     {"precision", m.precision},
                     {"recall", m.recall},
                     {"accuracy", m.accuracy},
                     {"n", g.global.n_central}};
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    out << j.dump(2) << "\n";
    std::cout << "eval f1=" << m.f1 << " auc=" << auc << " -> " << out_path << "\n";
}

void cmd_embed(const std::string& graph_dir, const std::string& ckpt, const std::string& out_path,
               int threads) {
    TribeStyleGraph g = load_graph(graph_dir);
    ModelParams P = load_checkpoint(ckpt);
    auto ctxs = make_tribe_contexts(g, threads);
    Tensor H = encode_tribes_eval(ctxs, P, threads);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    out << "central_id";
    for (int j = 0; j < H.cols; ++j) out << ",h" << j;
    out << "\n";
    for (int i = 0; i < H.rows; ++i) {
        out << i;
        for (int j = 0; j < H.cols; ++j) out << ',' << fmt_double(H.at(i, j));
        out << "\n";
    }
    std::cout << "wrote " << H.rows << " tribe embeddings (" << H.cols << " dims) -> " << out_path
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tribe-style graph risk model"};
    app.require_subcommand(1);

    std::string config_path, graph_dir, out_path, ckpt;
    long long seed = -1;  // -1 = use config value
    int threads = 1;
    bool features = false;
    std::vector<std::string> ablations;

    auto* gen = app.add_subcommand("generate", "synthesize a tribe-style graph dataset");
    gen->add_option("--config", config_path, "generator config json (default: built-in benchmark)");
    gen->add_option("--out", out_path, "output graph directory")->required();
    gen->add_option("--seed", seed, "override config seed");

    auto* stats = app.add_subcommand("stats", "per-tribe and per-class structure statistics");
    stats->add_option("--graph", graph_dir, "graph directory")->required();
    stats->add_option("--out", out_path, "output directory")->required();
    stats->add_flag("--features", features, "also dump the per-node feature table");

    auto* tr = app.add_subcommand("train", "train the model and write metrics + checkpoint");
    tr->add_option("--graph", graph_dir, "graph directory")->required();
    tr->add_option("--config", config_path, "train config json (default: built-in defaults)");
    tr->add_option("--out", out_path, "output directory")->required();
    tr->add_option("--seed", seed, "override config seed");
    tr->add_option("--threads", threads, "tribe-level worker count")->check(CLI::PositiveNumber);
    tr->add_option("--ablation", ablations, "disable components: tse ggrl cl fusion attrs emb");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a graph");
    ev->add_option("--graph", graph_dir, "graph directory")->required();
    ev->add_option("--checkpoint", ckpt, "checkpoint json")->required();
    ev->add_option("--out", out_path, "output metrics json path")->required();
    ev->add_option("--threads", threads, "tribe-level worker count")->check(CLI::PositiveNumber);

    auto* em = app.add_subcommand("embed", "dump eval-mode tribe representations as csv");
    em->add_option("--graph", graph_dir, "graph directory")->required();
    em->add_option("--checkpoint", ckpt, "checkpoint json")->required();
    em->add_option("--out", out_path, "output csv path")->required();
    em->add_option("--threads", threads, "tribe-level worker count")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) cmd_generate(config_path, out_path, seed);
        else if (stats->parsed()) cmd_stats(graph_dir, out_path, features);
        else if (tr->parsed()) cmd_train(graph_dir, config_path, out_path, seed, threads, ablations);
        else if (ev->parsed()) cmd_eval(graph_dir, ckpt, out_path, threads);
        else if (em->parsed()) cmd_embed(graph_dir, ckpt, out_path, threads);
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConvergenceError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
