#include "futurerec/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace futurerec {
namespace ops {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

using Node = std::shared_ptr<detail::TensorNode>;

bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::active()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void record(Tensor& out, std::function<void()> fn) {
    out.set_requires_grad(true);
    Tape::active()->record(out, std::move(fn));
}

void require_2d(const Tensor& t, const char* who) {
    if (t.ndim() != 2)
        throw shape_error(std::string(who) + ": expected a matrix, got " + shape_str(t.shape()));
}

int64_t last_dim(const Tensor& t) {
    if (t.ndim() < 1 || t.size() == 0)
        throw shape_error("expected a non-empty tensor, got " + shape_str(t.shape()));
    return t.shape().back();
}

void require_finite_rows(const Tensor& t, const char* who) {
    for (double v : t.data())
        if (!std::isfinite(v))
            throw numeric_error(std::string(who) + ": non-finite input value");
}

std::vector<int64_t> drop_last(const std::vector<int64_t>& shape) {
    std::vector<int64_t> out(shape.begin(), shape.end() - 1);
    if (out.empty()) out = {1};
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw shape_error("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    MMap(out.data().data(), m, n).noalias() =
        CMap(a.data().data(), m, k) * CMap(b.data().data(), k, n);
    if (recording({&a, &b})) {
        record(out, [an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
            CMap g(on->grad.data(), m, n);
            if (an->requires_grad) {
                an->ensure_grad();
                MMap(an->grad.data(), m, k).noalias() +=
                    g * CMap(bn->value.data(), k, n).transpose();
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                MMap(bn->grad.data(), k, n).noalias() +=
                    CMap(an->value.data(), m, k).transpose() * g;
            }
        });
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k)
        throw shape_error("matmul_nt: inner dimensions disagree: " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()) + " (transposed)");
    Tensor out = Tensor::zeros({m, n});
    MMap(out.data().data(), m, n).noalias() =
        CMap(a.data().data(), m, k) * CMap(b.data().data(), n, k).transpose();
    if (recording({&a, &b})) {
        record(out, [an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
            CMap g(on->grad.data(), m, n);
            if (an->requires_grad) {
                an->ensure_grad();
                MMap(an->grad.data(), m, k).noalias() += g * CMap(bn->value.data(), n, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                MMap(bn->grad.data(), n, k).noalias() +=
                    g.transpose() * CMap(an->value.data(), m, k);
            }
        });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_2d(x, "linear");
    require_2d(w, "linear");
    const int64_t n = x.dim(0), din = x.dim(1), dout = w.dim(1);
    if (w.dim(0) != din || b.ndim() != 1 || b.dim(0) != dout)
        throw shape_error("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                          shape_str(w.shape()) + " b" + shape_str(b.shape()));
    Tensor out = Tensor::zeros({n, dout});
    MMap o(out.data().data(), n, dout);
    o.noalias() = CMap(x.data().data(), n, din) * CMap(w.data().data(), din, dout);
    o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), dout);
    if (recording({&x, &w, &b})) {
        record(out, [xn = x.node(), wn = w.node(), bn = b.node(), on = out.node(), n, din, dout] {
            CMap g(on->grad.data(), n, dout);
            if (xn->requires_grad) {
                xn->ensure_grad();
                MMap(xn->grad.data(), n, din).noalias() +=
                    g * CMap(wn->value.data(), din, dout).transpose();
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                MMap(wn->grad.data(), din, dout).noalias() +=
                    CMap(xn->value.data(), n, din).transpose() * g;
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                Eigen::Map<Eigen::RowVectorXd>(bn->grad.data(), dout) += g.colwise().sum();
            }
        });
    }
    return out;
}

Tensor block_matmul_nt(const Tensor& a, const Tensor& b, int64_t blocks) {
    require_2d(a, "block_matmul_nt");
    require_2d(b, "block_matmul_nt");
    if (blocks < 1 || a.dim(0) % blocks != 0 || a.shape() != b.shape())
        throw shape_error("block_matmul_nt: bad blocking of " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    const int64_t t = a.dim(0) / blocks, k = a.dim(1);
    Tensor out = Tensor::zeros({blocks * t, t});
    for (int64_t i = 0; i < blocks; ++i) {
        MMap(out.data().data() + i * t * t, t, t).noalias() =
            CMap(a.data().data() + i * t * k, t, k) *
            CMap(b.data().data() + i * t * k, t, k).transpose();
    }
    if (recording({&a, &b})) {
        record(out, [an = a.node(), bn = b.node(), on = out.node(), blocks, t, k] {
            for (int64_t i = 0; i < blocks; ++i) {
                CMap g(on->grad.data() + i * t * t, t, t);
                if (an->requires_grad) {
                    an->ensure_grad();
                    MMap(an->grad.data() + i * t * k, t, k).noalias() +=
                        g * CMap(bn->value.data() + i * t * k, t, k);
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    MMap(bn->grad.data() + i * t * k, t, k).noalias() +=
                        g.transpose() * CMap(an->value.data() + i * t * k, t, k);
                }
            }
        });
    }
    return out;
}

Tensor block_matmul(const Tensor& a, const Tensor& b, int64_t blocks) {
    require_2d(a, "block_matmul");
    require_2d(b, "block_matmul");
    if (blocks < 1 || a.dim(0) % blocks != 0 || b.dim(0) % blocks != 0 ||
        a.dim(0) != b.dim(0) || a.dim(1) != a.dim(0) / blocks)
        throw shape_error("block_matmul: bad blocking of " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    const int64_t t = a.dim(0) / blocks, k = b.dim(1);
    Tensor out = Tensor::zeros({blocks * t, k});
    for (int64_t i = 0; i < blocks; ++i) {
        MMap(out.data().data() + i * t * k, t, k).noalias() =
            CMap(a.data().data() + i * t * t, t, t) * CMap(b.data().data() + i * t * k, t, k);
    }
    if (recording({&a, &b})) {
        record(out, [an = a.node(), bn = b.node(), on = out.node(), blocks, t, k] {
            for (int64_t i = 0; i < blocks; ++i) {
                CMap g(on->grad.data() + i * t * k, t, k);
                if (an->requires_grad) {
                    an->ensure_grad();
                    MMap(an->grad.data() + i * t * t, t, t).noalias() +=
                        g * CMap(bn->value.data() + i * t * k, t, k).transpose();
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    MMap(bn->grad.data() + i * t * k, t, k).noalias() +=
                        CMap(an->value.data() + i * t * t, t, t).transpose() * g;
                }
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw shape_error("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    const int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (recording({&a, &b})) {
        record(out, [an = a.node(), bn = b.node(), on = out.node(), n] {
            for (auto* in : {an.get(), bn.get()}) {
                if (!in->requires_grad) continue;
                in->ensure_grad();
                for (int64_t i = 0; i < n; ++i) in->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw shape_error("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    const int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (recording({&a, &b})) {
        record(out, [an = a.node(), bn = b.node(), on = out.node(), n] {
            if (an->requires_grad) {
                an->ensure_grad();
                for (int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i] * an->value[i];
            }
        });
    }
    return out;
}

Tensor scalar_mul(const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape());
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = c * x.data()[i];
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), c, n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i) xn->grad[i] += c * on->grad[i];
        });
    }
    return out;
}

Tensor exp(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = std::exp(x.data()[i]);
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i] * on->value[i];
        });
    }
    return out;
}

Tensor log(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) {
        if (x.data()[i] <= 0.0)
            throw numeric_error("log: non-positive input " + std::to_string(x.data()[i]));
        out.data()[i] = std::log(x.data()[i]);
    }
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i] / xn->value[i];
        });
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    if (recording({&x})) {
        // subgradient at exactly 0 is 0
        record(out, [xn = x.node(), on = out.node(), n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                if (xn->value[i] > 0.0) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::scalar(s);
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node()] {
            xn->ensure_grad();
            const double g = on->grad[0];
            for (double& d : xn->grad) d += g;
        });
    }
    return out;
}

Tensor mean_all(const Tensor& x) {
    if (x.size() == 0) throw shape_error("mean_all: empty tensor");
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    Tensor out = Tensor::scalar(s * inv);
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), inv] {
            xn->ensure_grad();
            const double g = on->grad[0] * inv;
            for (double& d : xn->grad) d += g;
        });
    }
    return out;
}

Tensor mean_lastdim(const Tensor& x) {
    const int64_t n = last_dim(x);
    const int64_t rows = x.size() / n;
    Tensor out = Tensor::zeros(drop_last(x.shape()));
    for (int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += x.data()[r * n + i];
        out.data()[r] = s / static_cast<double>(n);
    }
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), rows, n] {
            xn->ensure_grad();
            const double inv = 1.0 / static_cast<double>(n);
            for (int64_t r = 0; r < rows; ++r) {
                const double g = on->grad[r] * inv;
                for (int64_t i = 0; i < n; ++i) xn->grad[r * n + i] += g;
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, std::vector<int64_t> shape) {
    if (shape_numel(shape) != x.size())
        throw shape_error("reshape: cannot view " + shape_str(x.shape()) + " as " +
                          shape_str(shape));
    Tensor out = Tensor::from_data(std::move(shape), x.data());
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node()] {
            xn->ensure_grad();
            for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw shape_error("concat_rows: no inputs");
    std::vector<int64_t> shape = parts[0].shape();
    int64_t total0 = 0;
    for (const Tensor& p : parts) {
        auto s = p.shape();
        s[0] = shape[0];
        if (s != shape)
            throw shape_error("concat_rows: incompatible part " + shape_str(p.shape()));
        total0 += p.dim(0);
    }
    shape[0] = total0;
    Tensor out = Tensor::zeros(shape);
    int64_t offset = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.data().begin() + offset);
        offset += p.size();
    }
    bool any = false;
    for (const Tensor& p : parts) any = any || p.requires_grad();
    if (Tape::active() && any) {
        std::vector<Node> nodes;
        for (const Tensor& p : parts) nodes.push_back(p.node());
        record(out, [nodes, on = out.node()] {
            int64_t off = 0;
            for (const Node& pn : nodes) {
                const int64_t sz = pn->size();
                if (pn->requires_grad) {
                    pn->ensure_grad();
                    for (int64_t i = 0; i < sz; ++i) pn->grad[i] += on->grad[off + i];
                }
                off += sz;
            }
        });
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw shape_error("concat_cols: no inputs");
    const int64_t rows = parts[0].rows();
    int64_t total_cols = 0;
    for (const Tensor& p : parts) {
        require_2d(p, "concat_cols");
        if (p.rows() != rows)
            throw shape_error("concat_cols: row mismatch " + shape_str(p.shape()));
        total_cols += p.cols();
    }
    Tensor out = Tensor::zeros({rows, total_cols});
    int64_t col = 0;
    for (const Tensor& p : parts) {
        const int64_t c = p.cols();
        for (int64_t r = 0; r < rows; ++r)
            std::copy(p.data().begin() + r * c, p.data().begin() + (r + 1) * c,
                      out.data().begin() + r * total_cols + col);
        col += c;
    }
    bool any = false;
    for (const Tensor& p : parts) any = any || p.requires_grad();
    if (Tape::active() && any) {
        std::vector<Node> nodes;
        std::vector<int64_t> widths;
        for (const Tensor& p : parts) {
            nodes.push_back(p.node());
            widths.push_back(p.cols());
        }
        record(out, [nodes, widths, on = out.node(), rows, total_cols] {
            int64_t col = 0;
            for (size_t pi = 0; pi < nodes.size(); ++pi) {
                const Node& pn = nodes[pi];
                const int64_t c = widths[pi];
                if (pn->requires_grad) {
                    pn->ensure_grad();
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t j = 0; j < c; ++j)
                            pn->grad[r * c + j] += on->grad[r * total_cols + col + j];
                }
                col += c;
            }
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, int64_t start, int64_t len) {
    require_2d(x, "slice_cols");
    const int64_t rows = x.dim(0), cols = x.dim(1);
    if (start < 0 || len < 1 || start + len > cols)
        throw shape_error("slice_cols: range [" + std::to_string(start) + "," +
                          std::to_string(start + len) + ") out of " + shape_str(x.shape()));
    Tensor out = Tensor::zeros({rows, len});
    for (int64_t r = 0; r < rows; ++r)
        std::copy(x.data().begin() + r * cols + start, x.data().begin() + r * cols + start + len,
                  out.data().begin() + r * len);
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), rows, cols, start, len] {
            xn->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < len; ++j)
                    xn->grad[r * cols + start + j] += on->grad[r * len + j];
        });
    }
    return out;
}

Tensor select_rows(const Tensor& x, const std::vector<int64_t>& row_ids) {
    require_2d(x, "select_rows");
    const int64_t rows = x.dim(0), cols = x.dim(1);
    for (int64_t id : row_ids)
        if (id < 0 || id >= rows)
            throw index_error("select_rows: row " + std::to_string(id) + " out of " +
                              shape_str(x.shape()));
    Tensor out = Tensor::zeros({static_cast<int64_t>(row_ids.size()), cols});
    for (size_t i = 0; i < row_ids.size(); ++i)
        std::copy(x.data().begin() + row_ids[i] * cols, x.data().begin() + (row_ids[i] + 1) * cols,
                  out.data().begin() + static_cast<int64_t>(i) * cols);
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), row_ids, cols] {
            xn->ensure_grad();
            for (size_t i = 0; i < row_ids.size(); ++i)
                for (int64_t j = 0; j < cols; ++j)
                    xn->grad[row_ids[i] * cols + j] +=
                        on->grad[static_cast<int64_t>(i) * cols + j];
        });
    }
    return out;
}

Tensor add_block_bias(const Tensor& x, const Tensor& p, int64_t blocks) {
    require_2d(x, "add_block_bias");
    require_2d(p, "add_block_bias");
    const int64_t t = p.dim(0), d = p.dim(1);
    if (blocks < 1 || x.dim(0) != blocks * t || x.dim(1) != d)
        throw shape_error("add_block_bias: " + shape_str(x.shape()) + " is not " +
                          std::to_string(blocks) + " blocks of " + shape_str(p.shape()));
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t b = 0; b < blocks; ++b)
        for (int64_t i = 0; i < t * d; ++i)
            out.data()[b * t * d + i] = x.data()[b * t * d + i] + p.data()[i];
    if (recording({&x, &p})) {
        record(out, [xn = x.node(), pn = p.node(), on = out.node(), blocks, t, d] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[i];
            }
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (int64_t b = 0; b < blocks; ++b)
                    for (int64_t i = 0; i < t * d; ++i) pn->grad[i] += on->grad[b * t * d + i];
            }
        });
    }
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    require_finite_rows(x, "softmax");
    const int64_t n = last_dim(x);
    const int64_t rows = x.size() / n;
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * n;
        double* yr = out.data().data() + r * n;
        double mx = xr[0];
        for (int64_t i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
        double z = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            z += yr[i];
        }
        for (int64_t i = 0; i < n; ++i) yr[i] /= z;
    }
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), rows, n] {
            xn->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const double* y = on->value.data() + r * n;
                const double* g = on->grad.data() + r * n;
                double dot = 0.0;
                for (int64_t i = 0; i < n; ++i) dot += g[i] * y[i];
                for (int64_t i = 0; i < n; ++i) xn->grad[r * n + i] += y[i] * (g[i] - dot);
            }
        });
    }
    return out;
}

Tensor log_softmax_lastdim(const Tensor& x) {
    require_finite_rows(x, "log_softmax");
    const int64_t n = last_dim(x);
    const int64_t rows = x.size() / n;
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * n;
        double* yr = out.data().data() + r * n;
        double mx = xr[0];
        for (int64_t i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
        double z = 0.0;
        for (int64_t i = 0; i < n; ++i) z += std::exp(xr[i] - mx);
        const double lz = std::log(z);
        for (int64_t i = 0; i < n; ++i) yr[i] = xr[i] - mx - lz;
    }
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), rows, n] {
            xn->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const double* y = on->value.data() + r * n;
                const double* g = on->grad.data() + r * n;
                double gsum = 0.0;
                for (int64_t i = 0; i < n; ++i) gsum += g[i];
                for (int64_t i = 0; i < n; ++i)
                    xn->grad[r * n + i] += g[i] - std::exp(y[i]) * gsum;
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const int64_t d = last_dim(x);
    if (eps <= 0.0) throw contract_error("layer_norm: eps must be positive");
    if (gain.ndim() != 1 || gain.dim(0) != d || bias.ndim() != 1 || bias.dim(0) != d)
        throw shape_error("layer_norm: gain/bias must be [" + std::to_string(d) + "], got " +
                          shape_str(gain.shape()) + " and " + shape_str(bias.shape()));
    const int64_t rows = x.size() / d;
    Tensor out = Tensor::zeros(x.shape());
    std::vector<double> inv_std(static_cast<size_t>(rows));
    std::vector<double> xhat(x.data().size());
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * d;
        double mu = 0.0;
        for (int64_t i = 0; i < d; ++i) mu += xr[i];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = inv;
        for (int64_t i = 0; i < d; ++i) {
            xhat[r * d + i] = (xr[i] - mu) * inv;
            out.data()[r * d + i] = gain.data()[i] * xhat[r * d + i] + bias.data()[i];
        }
    }
    if (recording({&x, &gain, &bias})) {
        record(out, [xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node(), rows, d,
                     inv_std = std::move(inv_std), xhat = std::move(xhat)] {
            for (int64_t r = 0; r < rows; ++r) {
                const double* g = on->grad.data() + r * d;
                const double* xh = xhat.data() + r * d;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int64_t i = 0; i < d; ++i) gn->grad[i] += g[i] * xh[i];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int64_t i = 0; i < d; ++i) bn->grad[i] += g[i];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    double m1 = 0.0, m2 = 0.0;
                    for (int64_t i = 0; i < d; ++i) {
                        const double gg = g[i] * gn->value[i];
                        m1 += gg;
                        m2 += gg * xh[i];
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    const double inv = inv_std[static_cast<size_t>(r)];
                    for (int64_t i = 0; i < d; ++i) {
                        const double gg = g[i] * gn->value[i];
                        xn->grad[r * d + i] += inv * (gg - m1 - xh[i] * m2);
                    }
                }
            }
        });
    }
    return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids) {
    require_2d(table, "embedding_lookup");
    const int64_t v = table.dim(0), d = table.dim(1);
    for (int64_t id : ids)
        if (id < 0 || id >= v)
            throw index_error("embedding_lookup: id " + std::to_string(id) +
                              " out of range [0," + std::to_string(v) + ")");
    Tensor out = Tensor::zeros({static_cast<int64_t>(ids.size()), d});
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy(table.data().begin() + ids[i] * d, table.data().begin() + (ids[i] + 1) * d,
                  out.data().begin() + static_cast<int64_t>(i) * d);
    if (recording({&table})) {
        record(out, [tn = table.node(), on = out.node(), ids, d] {
            tn->ensure_grad();
            for (size_t i = 0; i < ids.size(); ++i)
                for (int64_t j = 0; j < d; ++j)
                    tn->grad[ids[i] * d + j] += on->grad[static_cast<int64_t>(i) * d + j];
        });
    }
    return out;
}

Tensor gather_lastdim(const Tensor& x, const std::vector<int64_t>& ids) {
    require_2d(x, "gather_lastdim");
    const int64_t n = x.dim(0), v = x.dim(1);
    if (static_cast<int64_t>(ids.size()) != n)
        throw shape_error("gather_lastdim: " + std::to_string(ids.size()) + " ids for " +
                          shape_str(x.shape()));
    for (int64_t id : ids)
        if (id < 0 || id >= v)
            throw index_error("gather_lastdim: id " + std::to_string(id) + " out of range [0," +
                              std::to_string(v) + ")");
    Tensor out = Tensor::zeros({n});
    for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i * v + ids[static_cast<size_t>(i)]];
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), ids, n, v] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                xn->grad[i * v + ids[static_cast<size_t>(i)]] += on->grad[i];
        });
    }
    return out;
}

Tensor detach(const Tensor& x) {
    return Tensor::from_data(x.shape(), x.data(), /*requires_grad=*/false);
}

Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0)
        throw contract_error("dropout: rate must be in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const int64_t n = x.size();
    const double scale = 1.0 / (1.0 - p);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> mask(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) mask[static_cast<size_t>(i)] = u(rng) < p ? 0.0 : scale;
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * mask[static_cast<size_t>(i)];
    if (recording({&x})) {
        record(out, [xn = x.node(), on = out.node(), mask = std::move(mask), n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                xn->grad[i] += on->grad[i] * mask[static_cast<size_t>(i)];
        });
    }
    return out;
}

Tensor shannon_entropy(const Tensor& probs) {
    constexpr double kEps = 1e-12;
    const int64_t v = last_dim(probs);
    const int64_t rows = probs.size() / v;
    Tensor out = Tensor::zeros(drop_last(probs.shape()));
    for (int64_t r = 0; r < rows; ++r) {
        const double* pr = probs.data().data() + r * v;
        double s = 0.0, h = 0.0;
        for (int64_t i = 0; i < v; ++i) {
            s += pr[i];
            if (pr[i] >= kEps) h -= pr[i] * std::log(pr[i]);
        }
        if (std::abs(s - 1.0) > 1e-4)
            throw contract_error("shannon_entropy: row " + std::to_string(r) + " sums to " +
                                 std::to_string(s));
        out.data()[r] = h;
    }
    if (recording({&probs})) {
        record(out, [pn = probs.node(), on = out.node(), rows, v] {
            pn->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const double g = on->grad[r];
                for (int64_t i = 0; i < v; ++i) {
                    const double p = pn->value[r * v + i];
                    if (p >= kEps) pn->grad[r * v + i] += -g * (std::log(p) + 1.0);
                }
            }
        });
    }
    return out;
}

}  // namespace ops
}  // namespace futurerec
