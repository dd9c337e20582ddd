#ifndef THGNN_AUTODIFF_HPP
#define THGNN_AUTODIFF_HPP

#include <cmath>
#include <cstring>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "thgnn/common.hpp"

namespace thgnn {

struct Tensor {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
    size_t size() const { return data.size(); }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

// A named learnable parameter with a persistent gradient slot.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, int r, int c) : name(std::move(n)), value(r, c), grad(r, c) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

namespace detail {

// C(m x n) += A(m x k) * B(k x n)
inline void gemm_nn_acc(int m, int k, int n, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        double* c = C + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = a[p];
            if (av == 0.0) continue;
            const double* b = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C(m x n) += A(m x k) * B(n x k)^T
inline void gemm_nt_acc(int m, int k, int n, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        double* c = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* b = B + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a[p] * b[p];
            c[j] += s;
        }
    }
}

// C(k x n) += A(m x k)^T * B(m x n)
inline void gemm_tn_acc(int m, int k, int n, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        const double* b = B + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = a[p];
            if (av == 0.0) continue;
            double* c = C + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace detail

// Reverse-mode tape over dense f64 matrices. One tape per forward pass;
// backward visits ops in exact reverse execution order.
class Tape {
public:
    using Var = int;

    struct Node {
        int rows = 0, cols = 0;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void(Tape&)> back;
    };

    const Node& node(Var v) const { return nodes_[v]; }
    int rows(Var v) const { return nodes_[v].rows; }
    int cols(Var v) const { return nodes_[v].cols; }
    const std::vector<double>& val(Var v) const { return nodes_[v].val; }
    const std::vector<double>& grad(Var v) const { return nodes_[v].grad; }

    Tensor value_tensor(Var v) const {
        Tensor t(nodes_[v].rows, nodes_[v].cols);
        t.data = nodes_[v].val;
        return t;
    }

    size_t num_nodes() const { return nodes_.size(); }
    const std::vector<std::pair<Param*, Var>>& leaves() const { return leaves_; }

    Var leaf(Param& p) {
        Var v = make(p.value.rows, p.value.cols, p.value.data);
        leaves_.emplace_back(&p, v);
        return v;
    }

    // A differentiable input that is not a parameter; its gradient can be
    // read back after backward() (used to bridge per-tribe tapes).
    Var input(const Tensor& t) { return make(t.rows, t.cols, t.data); }

    Var constant(const Tensor& t) { return make(t.rows, t.cols, t.data); }

    Var matmul(Var a, Var b) {
        auto& na = nodes_[a];
        auto& nb = nodes_[b];
        if (na.cols != nb.rows)
            throw ShapeError("matmul: " + shape_str(a) + " x " + shape_str(b));
        Var v = make(na.rows, nb.cols);
        detail::gemm_nn_acc(na.rows, na.cols, nb.cols, na.val.data(), nb.val.data(), nodes_[v].val.data());
        check(v, "matmul");
        nodes_[v].back = [a, b, v](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& B = tp.nodes_[b];
            auto& C = tp.nodes_[v];
            detail::gemm_nt_acc(C.rows, C.cols, A.cols, C.grad.data(), B.val.data(), A.grad.data());
            detail::gemm_tn_acc(A.rows, A.cols, C.cols, A.val.data(), C.grad.data(), B.grad.data());
        };
        return v;
    }

    // a * b^T
    Var matmul_nt(Var a, Var b) {
        auto& na = nodes_[a];
        auto& nb = nodes_[b];
        if (na.cols != nb.cols)
            throw ShapeError("matmul_nt: " + shape_str(a) + " x " + shape_str(b) + "^T");
        Var v = make(na.rows, nb.rows);
        detail::gemm_nt_acc(na.rows, na.cols, nb.rows, na.val.data(), nb.val.data(), nodes_[v].val.data());
        check(v, "matmul_nt");
        nodes_[v].back = [a, b, v](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& B = tp.nodes_[b];
            auto& C = tp.nodes_[v];
            // dA += dC * B ; dB += dC^T * A
            detail::gemm_nn_acc(C.rows, C.cols, A.cols, C.grad.data(), B.val.data(), A.grad.data());
            detail::gemm_tn_acc(C.rows, C.cols, B.cols, C.grad.data(), A.val.data(), B.grad.data());
        };
        return v;
    }

    Var add(Var a, Var b) {
        require_same(a, b, "add");
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& x = nodes_[a].val;
        const auto& y = nodes_[b].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
        check(v, "add");
        nodes_[v].back = [a, b, v](Tape& tp) {
            tp.axpy(1.0, v, a);
            tp.axpy(1.0, v, b);
        };
        return v;
    }

    Var sub(Var a, Var b) {
        require_same(a, b, "sub");
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& x = nodes_[a].val;
        const auto& y = nodes_[b].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
        check(v, "sub");
        nodes_[v].back = [a, b, v](Tape& tp) {
            tp.axpy(1.0, v, a);
            tp.axpy(-1.0, v, b);
        };
        return v;
    }

    // a + c * b
    Var add_scaled(Var a, Var b, double c) {
        require_same(a, b, "add_scaled");
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& x = nodes_[a].val;
        const auto& y = nodes_[b].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] + c * y[i];
        check(v, "add_scaled");
        nodes_[v].back = [a, b, c, v](Tape& tp) {
            tp.axpy(1.0, v, a);
            tp.axpy(c, v, b);
        };
        return v;
    }

    Var scale(Var a, double c) {
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& x = nodes_[a].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = c * x[i];
        check(v, "scale");
        nodes_[v].back = [a, c, v](Tape& tp) { tp.axpy(c, v, a); };
        return v;
    }

    Var mul(Var a, Var b) {
        require_same(a, b, "mul");
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& x = nodes_[a].val;
        const auto& y = nodes_[b].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
        check(v, "mul");
        nodes_[v].back = [a, b, v](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& B = tp.nodes_[b];
            auto& C = tp.nodes_[v];
            for (size_t i = 0; i < C.grad.size(); ++i) {
                A.grad[i] += C.grad[i] * B.val[i];
                B.grad[i] += C.grad[i] * A.val[i];
            }
        };
        return v;
    }

    // x (n x d) scaled rowwise by column vector c (n x 1)
    Var mul_colvec(Var x, Var c) {
        auto& nx = nodes_[x];
        auto& nc = nodes_[c];
        if (nc.cols != 1 || nc.rows != nx.rows)
            throw ShapeError("mul_colvec: " + shape_str(x) + " by " + shape_str(c));
        Var v = clone_shape(x);
        auto& out = nodes_[v].val;
        for (int i = 0; i < nx.rows; ++i)
            for (int j = 0; j < nx.cols; ++j)
                out[static_cast<size_t>(i) * nx.cols + j] =
                    nx.val[static_cast<size_t>(i) * nx.cols + j] * nc.val[i];
        check(v, "mul_colvec");
        nodes_[v].back = [x, c, v](Tape& tp) {
            auto& X = tp.nodes_[x];
            auto& C = tp.nodes_[c];
            auto& O = tp.nodes_[v];
            for (int i = 0; i < X.rows; ++i) {
                double s = 0.0;
                for (int j = 0; j < X.cols; ++j) {
                    size_t k = static_cast<size_t>(i) * X.cols + j;
                    X.grad[k] += O.grad[k] * C.val[i];
                    s += O.grad[k] * X.val[k];
                }
                C.grad[i] += s;
            }
        };
        return v;
    }

    // (1 + s) * x with s a learnable 1x1 scalar
    Var scale_by_one_plus(Var x, Var s) {
        auto& ns = nodes_[s];
        if (ns.rows != 1 || ns.cols != 1) throw ShapeError("scale_by_one_plus: scalar expected");
        Var v = clone_shape(x);
        double f = 1.0 + ns.val[0];
        auto& out = nodes_[v].val;
        const auto& in = nodes_[x].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = f * in[i];
        check(v, "scale_by_one_plus");
        nodes_[v].back = [x, s, v, f](Tape& tp) {
            auto& X = tp.nodes_[x];
            auto& S = tp.nodes_[s];
            auto& O = tp.nodes_[v];
            double ds = 0.0;
            for (size_t i = 0; i < O.grad.size(); ++i) {
                X.grad[i] += f * O.grad[i];
                ds += O.grad[i] * X.val[i];
            }
            S.grad[0] += ds;
        };
        return v;
    }

    // x (n x d) + broadcast row b (1 x d)
    Var add_bias_row(Var x, Var b) {
        auto& nx = nodes_[x];
        auto& nb = nodes_[b];
        if (nb.rows != 1 || nb.cols != nx.cols)
            throw ShapeError("add_bias_row: " + shape_str(x) + " + " + shape_str(b));
        Var v = clone_shape(x);
        auto& out = nodes_[v].val;
        for (int i = 0; i < nx.rows; ++i)
            for (int j = 0; j < nx.cols; ++j)
                out[static_cast<size_t>(i) * nx.cols + j] =
                    nx.val[static_cast<size_t>(i) * nx.cols + j] + nb.val[j];
        check(v, "add_bias_row");
        nodes_[v].back = [x, b, v](Tape& tp) {
            auto& X = tp.nodes_[x];
            auto& B = tp.nodes_[b];
            auto& O = tp.nodes_[v];
            for (int i = 0; i < X.rows; ++i)
                for (int j = 0; j < X.cols; ++j) {
                    size_t k = static_cast<size_t>(i) * X.cols + j;
                    X.grad[k] += O.grad[k];
                    B.grad[j] += O.grad[k];
                }
        };
        return v;
    }

    Var concat_cols(const std::vector<Var>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no inputs");
        int r = nodes_[parts[0]].rows, c = 0;
        for (Var p : parts) {
            if (nodes_[p].rows != r) throw ShapeError("concat_cols: row mismatch");
            c += nodes_[p].cols;
        }
        Var v = make(r, c);
        auto& out = nodes_[v].val;
        int off = 0;
        for (Var p : parts) {
            auto& np = nodes_[p];
            for (int i = 0; i < r; ++i)
                std::memcpy(out.data() + static_cast<size_t>(i) * c + off,
                            np.val.data() + static_cast<size_t>(i) * np.cols,
                            sizeof(double) * np.cols);
            off += np.cols;
        }
        check(v, "concat_cols");
        auto parts_copy = parts;
        nodes_[v].back = [parts_copy, v, c](Tape& tp) {
            auto& O = tp.nodes_[v];
            int off = 0;
            for (Var p : parts_copy) {
                auto& np = tp.nodes_[p];
                for (int i = 0; i < np.rows; ++i)
                    for (int j = 0; j < np.cols; ++j)
                        np.grad[static_cast<size_t>(i) * np.cols + j] +=
                            O.grad[static_cast<size_t>(i) * c + off + j];
                off += np.cols;
            }
        };
        return v;
    }

    Var row_gather(Var x, const std::vector<int>& idx) {
        auto& nx = nodes_[x];
        for (int i : idx)
            if (i < 0 || i >= nx.rows) throw ShapeError("row_gather: index out of range");
        Var v = make(static_cast<int>(idx.size()), nx.cols);
        auto& out = nodes_[v].val;
        for (size_t r = 0; r < idx.size(); ++r)
            std::memcpy(out.data() + r * nx.cols, nx.val.data() + static_cast<size_t>(idx[r]) * nx.cols,
                        sizeof(double) * nx.cols);
        check(v, "row_gather");
        nodes_[v].back = [x, idx, v](Tape& tp) {
            auto& X = tp.nodes_[x];
            auto& O = tp.nodes_[v];
            for (size_t r = 0; r < idx.size(); ++r)
                for (int j = 0; j < X.cols; ++j)
                    X.grad[static_cast<size_t>(idx[r]) * X.cols + j] += O.grad[r * X.cols + j];
        };
        return v;
    }

    Var segment_sum(Var x, const std::vector<int>& seg, int n_segments) {
        auto& nx = nodes_[x];
        if (static_cast<int>(seg.size()) != nx.rows) throw ShapeError("segment_sum: segment id per row");
        for (int s : seg)
            if (s < 0 || s >= n_segments) throw ShapeError("segment_sum: bad segment id");
        Var v = make(n_segments, nx.cols);
        auto& out = nodes_[v].val;
        for (int i = 0; i < nx.rows; ++i)
            for (int j = 0; j < nx.cols; ++j)
                out[static_cast<size_t>(seg[i]) * nx.cols + j] += nx.val[static_cast<size_t>(i) * nx.cols + j];
        check(v, "segment_sum");
        nodes_[v].back = [x, seg, v](Tape& tp) {
            auto& X = tp.nodes_[x];
            auto& O = tp.nodes_[v];
            for (int i = 0; i < X.rows; ++i)
                for (int j = 0; j < X.cols; ++j)
                    X.grad[static_cast<size_t>(i) * X.cols + j] +=
                        O.grad[static_cast<size_t>(seg[i]) * X.cols + j];
        };
        return v;
    }

    // y_v = sum over u in adj[v] of x_u ; adj must be symmetric and must
    // outlive the tape (held by reference)
    Var neighbor_sum(Var x, const std::vector<std::vector<int>>& adj) {
        auto& nx = nodes_[x];
        if (static_cast<int>(adj.size()) != nx.rows) throw ShapeError("neighbor_sum: adj size mismatch");
        Var v = clone_shape(x);
        auto& out = nodes_[v].val;
        int c = nx.cols;
        for (int i = 0; i < nx.rows; ++i) {
            double* o = out.data() + static_cast<size_t>(i) * c;
            for (int u : adj[i]) {
                const double* src = nx.val.data() + static_cast<size_t>(u) * c;
                for (int j = 0; j < c; ++j) o[j] += src[j];
            }
        }
        check(v, "neighbor_sum");
        nodes_[v].back = [x, &adj, v](Tape& tp) {
            auto& X = tp.nodes_[x];
            auto& O = tp.nodes_[v];
            int c = X.cols;
            for (int i = 0; i < X.rows; ++i) {
                const double* g = O.grad.data() + static_cast<size_t>(i) * c;
                for (int u : adj[i]) {
                    double* dst = X.grad.data() + static_cast<size_t>(u) * c;
                    for (int j = 0; j < c; ++j) dst[j] += g[j];
                }
            }
        };
        return v;
    }

    Var relu(Var a) {
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& in = nodes_[a].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
        nodes_[v].back = [a, v](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& O = tp.nodes_[v];
            for (size_t i = 0; i < O.grad.size(); ++i)
                if (A.val[i] > 0.0) A.grad[i] += O.grad[i];
        };
        return v;
    }

    Var leaky_relu(Var a, double slope = 0.01) {
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& in = nodes_[a].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : slope * in[i];
        nodes_[v].back = [a, v, slope](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& O = tp.nodes_[v];
            for (size_t i = 0; i < O.grad.size(); ++i)
                A.grad[i] += (A.val[i] > 0.0 ? 1.0 : slope) * O.grad[i];
        };
        return v;
    }

    Var sigmoid(Var a) {
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& in = nodes_[a].val;
        for (size_t i = 0; i < out.size(); ++i) {
            double x = in[i];
            out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        }
        check(v, "sigmoid");
        nodes_[v].back = [a, v](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& O = tp.nodes_[v];
            for (size_t i = 0; i < O.grad.size(); ++i)
                A.grad[i] += O.val[i] * (1.0 - O.val[i]) * O.grad[i];
        };
        return v;
    }

    Var log_clamped(Var a, double eps = 1e-12) {
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& in = nodes_[a].val;
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(in[i], eps));
        check(v, "log_clamped");
        nodes_[v].back = [a, v, eps](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& O = tp.nodes_[v];
            for (size_t i = 0; i < O.grad.size(); ++i)
                if (A.val[i] > eps) A.grad[i] += O.grad[i] / A.val[i];
        };
        return v;
    }

    // rowwise softmax over the pair (e1, e2), max-subtracted; both n x 1
    std::pair<Var, Var> softmax_pair(Var e1, Var e2) {
        require_same(e1, e2, "softmax_pair");
        if (nodes_[e1].cols != 1) throw ShapeError("softmax_pair: column vectors expected");
        int n = nodes_[e1].rows;
        Var v1 = make(n, 1);
        Var v2 = make(n, 1);
        for (int i = 0; i < n; ++i) {
            double a = nodes_[e1].val[i], b = nodes_[e2].val[i];
            double m = std::max(a, b);
            double ea = std::exp(a - m), eb = std::exp(b - m);
            double s = ea + eb;
            nodes_[v1].val[i] = ea / s;
            nodes_[v2].val[i] = eb / s;
        }
        check(v1, "softmax_pair");
        check(v2, "softmax_pair");
        // joint backward lives on v1 (created first, so it runs last; by then
        // every consumer of v2 and v2 itself have already propagated)
        nodes_[v1].back = [e1, e2, v1, v2](Tape& tp) {
            auto& A1 = tp.nodes_[v1];
            auto& A2 = tp.nodes_[v2];
            for (int i = 0; i < A1.rows; ++i) {
                double j11 = A1.val[i] * A2.val[i];  // d alpha1 / d e1 = alpha1*alpha2
                double g = A1.grad[i] - A2.grad[i];
                tp.nodes_[e1].grad[i] += g * j11;
                tp.nodes_[e2].grad[i] -= g * j11;
            }
        };
        return {v1, v2};
    }

    // training-mode inverted dropout; mask drawn in row-major element order
    Var dropout(Var a, double rate, Rng& rng) {
        if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0,1)");
        if (rate == 0.0) return a;
        Var v = clone_shape(a);
        auto& out = nodes_[v].val;
        const auto& in = nodes_[a].val;
        auto mask = std::make_shared<std::vector<double>>(out.size());
        double keep = 1.0 - rate;
        for (size_t i = 0; i < out.size(); ++i) {
            (*mask)[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
            out[i] = in[i] * (*mask)[i];
        }
        nodes_[v].back = [a, v, mask](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& O = tp.nodes_[v];
            for (size_t i = 0; i < O.grad.size(); ++i) A.grad[i] += O.grad[i] * (*mask)[i];
        };
        return v;
    }

    // rows scaled to unit L2 norm (rows with norm below eps left unscaled)
    Var l2_normalize_rows(Var a, double eps = 1e-12) {
        auto& na = nodes_[a];
        Var v = clone_shape(a);
        auto norms = std::make_shared<std::vector<double>>(na.rows);
        for (int i = 0; i < na.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < na.cols; ++j) {
                double x = na.val[static_cast<size_t>(i) * na.cols + j];
                s += x * x;
            }
            double nrm = std::sqrt(s);
            (*norms)[i] = nrm > eps ? nrm : 1.0;
            for (int j = 0; j < na.cols; ++j)
                nodes_[v].val[static_cast<size_t>(i) * na.cols + j] =
                    na.val[static_cast<size_t>(i) * na.cols + j] / (*norms)[i];
        }
        check(v, "l2_normalize_rows");
        nodes_[v].back = [a, v, norms](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& O = tp.nodes_[v];
            for (int i = 0; i < A.rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < A.cols; ++j) {
                    size_t k = static_cast<size_t>(i) * A.cols + j;
                    dot += O.grad[k] * O.val[k];
                }
                for (int j = 0; j < A.cols; ++j) {
                    size_t k = static_cast<size_t>(i) * A.cols + j;
                    A.grad[k] += (O.grad[k] - dot * O.val[k]) / (*norms)[i];
                }
            }
        };
        return v;
    }

    // n x m -> n x 1, max-subtracted
    Var row_logsumexp(Var a) {
        auto& na = nodes_[a];
        Var v = make(na.rows, 1);
        for (int i = 0; i < na.rows; ++i) {
            const double* row = na.val.data() + static_cast<size_t>(i) * na.cols;
            double m = row[0];
            for (int j = 1; j < na.cols; ++j) m = std::max(m, row[j]);
            double s = 0.0;
            for (int j = 0; j < na.cols; ++j) s += std::exp(row[j] - m);
            nodes_[v].val[i] = m + std::log(s);
        }
        check(v, "row_logsumexp");
        nodes_[v].back = [a, v](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& O = tp.nodes_[v];
            for (int i = 0; i < A.rows; ++i)
                for (int j = 0; j < A.cols; ++j) {
                    size_t k = static_cast<size_t>(i) * A.cols + j;
                    A.grad[k] += O.grad[i] * std::exp(A.val[k] - O.val[i]);
                }
        };
        return v;
    }

    // main diagonal of a square matrix as n x 1
    Var take_diag(Var a) {
        auto& na = nodes_[a];
        if (na.rows != na.cols) throw ShapeError("take_diag: square matrix expected");
        Var v = make(na.rows, 1);
        for (int i = 0; i < na.rows; ++i)
            nodes_[v].val[i] = na.val[static_cast<size_t>(i) * na.cols + i];
        nodes_[v].back = [a, v](Tape& tp) {
            auto& A = tp.nodes_[a];
            auto& O = tp.nodes_[v];
            for (int i = 0; i < A.rows; ++i)
                A.grad[static_cast<size_t>(i) * A.cols + i] += O.grad[i];
        };
        return v;
    }

    Var sum_all(Var a) {
        Var v = make(1, 1);
        double s = 0.0;
        for (double x : nodes_[a].val) s += x;
        nodes_[v].val[0] = s;
        check(v, "sum_all");
        nodes_[v].back = [a, v](Tape& tp) {
            auto& A = tp.nodes_[a];
            double g = tp.nodes_[v].grad[0];
            for (double& d : A.grad) d += g;
        };
        return v;
    }

    Var mean_all(Var a) {
        double inv = 1.0 / static_cast<double>(nodes_[a].val.size());
        return scale(sum_all(a), inv);
    }

    // -(1/|mask|) sum over mask of [y log p + (1-y) log(1-p)], p clamped to [eps, 1-eps]
    Var bce_masked(Var p, const std::vector<double>& y, const std::vector<int>& mask, double eps = 1e-12) {
        auto& np = nodes_[p];
        if (np.cols != 1 || static_cast<int>(y.size()) != np.rows)
            throw ShapeError("bce_masked: p must be n x 1 matching labels");
        if (mask.empty()) throw InvariantViolation("bce_masked: empty mask");
        for (int i : mask)
            if (i < 0 || i >= np.rows) throw ShapeError("bce_masked: mask index out of range");
        Var v = make(1, 1);
        double loss = 0.0;
        for (int i : mask) {
            double pc = std::min(std::max(np.val[i], eps), 1.0 - eps);
            loss -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
        }
        nodes_[v].val[0] = loss / static_cast<double>(mask.size());
        check(v, "bce_masked");
        nodes_[v].back = [p, y, mask, eps, v](Tape& tp) {
            auto& P = tp.nodes_[p];
            double g = tp.nodes_[v].grad[0] / static_cast<double>(mask.size());
            for (int i : mask) {
                double pv = P.val[i];
                if (pv < eps || pv > 1.0 - eps) continue;  // clamp region has zero slope
                P.grad[i] += g * (pv - y[i]) / (pv * (1.0 - pv));
            }
        };
        return v;
    }

    double scalar(Var v) const {
        if (nodes_[v].val.size() != 1) throw ShapeError("scalar: not a 1x1 tensor");
        return nodes_[v].val[0];
    }

    // Backward from a scalar loss: seeds d(loss)/d(loss) = 1.
    void backward(Var loss) {
        if (nodes_[loss].val.size() != 1)
            throw ShapeError("backward: loss must be scalar");
        Tensor seed(1, 1, 1.0);
        backward_seeded(loss, seed);
    }

    // Backward seeding d(out)/d(out) with an externally supplied gradient.
    void backward_seeded(Var out, const Tensor& seed) {
        auto& no = nodes_[out];
        if (seed.rows != no.rows || seed.cols != no.cols)
            throw ShapeError("backward_seeded: seed shape mismatch");
        for (auto& n : nodes_) n.grad.assign(n.val.size(), 0.0);
        no.grad = seed.data;
        for (int i = out; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this);
    }

    // Adds leaf gradients into their parameters' grad slots, in creation order.
    void apply_leaf_grads() {
        for (auto& [param, var] : leaves_) {
            const auto& g = nodes_[var].grad;
            for (size_t i = 0; i < g.size(); ++i) param->grad.data[i] += g[i];
        }
    }

private:
    // deque: references to nodes stay valid while new ops are appended
    std::deque<Node> nodes_;
    std::vector<std::pair<Param*, Var>> leaves_;

    Var make(int r, int c) {
        nodes_.push_back(Node{r, c, std::vector<double>(static_cast<size_t>(r) * c, 0.0), {}, {}});
        return static_cast<Var>(nodes_.size() - 1);
    }

    Var make(int r, int c, const std::vector<double>& v) {
        nodes_.push_back(Node{r, c, v, {}, {}});
        Var id = static_cast<Var>(nodes_.size() - 1);
        check(id, "input");
        return id;
    }

    Var clone_shape(Var a) { return make(nodes_[a].rows, nodes_[a].cols); }

    void require_same(Var a, Var b, const char* op) {
        if (nodes_[a].rows != nodes_[b].rows || nodes_[a].cols != nodes_[b].cols)
            throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
    }

    std::string shape_str(Var v) const {
        return "(" + std::to_string(nodes_[v].rows) + "x" + std::to_string(nodes_[v].cols) + ")";
    }

    void check(Var v, const char* op) const {
        for (double x : nodes_[v].val)
            if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite value produced");
    }

    void axpy(double c, Var src, Var dst) {
        auto& g = nodes_[src].grad;
        auto& d = nodes_[dst].grad;
        for (size_t i = 0; i < g.size(); ++i) d[i] += c * g[i];
    }
};

using Var = Tape::Var;

}  // namespace thgnn

#endif
