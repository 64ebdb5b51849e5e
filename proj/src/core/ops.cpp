#include "ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cost.hpp"

namespace unist {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void check_output_finite(const TensorImpl& impl) {
    if (!finite_checks_enabled()) return;
    for (double v : impl.data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by op '") + impl.op_name +
                               "' (node " + std::to_string(impl.node_id) + ")");
        }
    }
}

Tensor make_output(const std::vector<int>& shape, const char* name,
                   std::vector<Tensor> parents) {
    bool rg = false;
    if (grad_enabled()) {
        for (const Tensor& p : parents) rg = rg || p.requires_grad();
    }
    Tensor out = Tensor::zeros(shape, rg);
    out.impl().op_name = name;
    if (rg) out.impl().parents = std::move(parents);
    return out;
}

// Attaches the backward fn (when tracking) and enforces the finite-output
// contract.
Tensor seal(Tensor out, std::function<void(TensorImpl&)> bw) {
    if (out.requires_grad()) out.impl().backward_fn = std::move(bw);
    check_output_finite(out.impl());
    return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

std::vector<int64_t> row_major_strides(const std::vector<int>& shape) {
    std::vector<int64_t> st(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        st[static_cast<size_t>(i)] =
            st[static_cast<size_t>(i) + 1] * shape[static_cast<size_t>(i) + 1];
    }
    return st;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = make_output(a.shape(), "add", {a, b});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = a.at(i) + b.at(i);
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n](TensorImpl& o) {
        for (int pi = 0; pi < 2; ++pi) {
            TensorImpl& p = o.parents[static_cast<size_t>(pi)].impl();
            if (!p.requires_grad) continue;
            for (int64_t i = 0; i < n; ++i) p.grad[static_cast<size_t>(i)] += o.grad[static_cast<size_t>(i)];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = make_output(a.shape(), "sub", {a, b});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = a.at(i) - b.at(i);
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n](TensorImpl& o) {
        TensorImpl& pa = o.parents[0].impl();
        TensorImpl& pb = o.parents[1].impl();
        if (pa.requires_grad) {
            for (int64_t i = 0; i < n; ++i) pa.grad[static_cast<size_t>(i)] += o.grad[static_cast<size_t>(i)];
        }
        if (pb.requires_grad) {
            for (int64_t i = 0; i < n; ++i) pb.grad[static_cast<size_t>(i)] -= o.grad[static_cast<size_t>(i)];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = make_output(a.shape(), "mul", {a, b});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = a.at(i) * b.at(i);
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n](TensorImpl& o) {
        TensorImpl& pa = o.parents[0].impl();
        TensorImpl& pb = o.parents[1].impl();
        if (pa.requires_grad) {
            for (int64_t i = 0; i < n; ++i) {
                pa.grad[static_cast<size_t>(i)] +=
                    o.grad[static_cast<size_t>(i)] * pb.data[static_cast<size_t>(i)];
            }
        }
        if (pb.requires_grad) {
            for (int64_t i = 0; i < n; ++i) {
                pb.grad[static_cast<size_t>(i)] +=
                    o.grad[static_cast<size_t>(i)] * pa.data[static_cast<size_t>(i)];
            }
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    Tensor out = make_output(a.shape(), "div", {a, b});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = a.at(i) / b.at(i);
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n](TensorImpl& o) {
        TensorImpl& pa = o.parents[0].impl();
        TensorImpl& pb = o.parents[1].impl();
        for (int64_t i = 0; i < n; ++i) {
            const size_t u = static_cast<size_t>(i);
            const double inv = 1.0 / pb.data[u];
            if (pa.requires_grad) pa.grad[u] += o.grad[u] * inv;
            if (pb.requires_grad) pb.grad[u] -= o.grad[u] * pa.data[u] * inv * inv;
        }
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = make_output(a.shape(), "add_scalar", {a});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = a.at(i) + s;
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t i = 0; i < n; ++i) p.grad[static_cast<size_t>(i)] += o.grad[static_cast<size_t>(i)];
    });
}

Tensor mul_scalar(const Tensor& a, double s) {
    Tensor out = make_output(a.shape(), "mul_scalar", {a});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = a.at(i) * s;
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n, s](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t i = 0; i < n; ++i) {
            p.grad[static_cast<size_t>(i)] += o.grad[static_cast<size_t>(i)] * s;
        }
    });
}

Tensor relu(const Tensor& a) {
    Tensor out = make_output(a.shape(), "relu", {a});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = a.at(i) > 0.0 ? a.at(i) : 0.0;
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t i = 0; i < n; ++i) {
            const size_t u = static_cast<size_t>(i);
            if (p.data[u] > 0.0) p.grad[u] += o.grad[u];
        }
    });
}

Tensor gelu(const Tensor& a) {
    Tensor out = make_output(a.shape(), "gelu", {a});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double x = a.at(i);
        out.mutable_data()[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    meter_add("eltwise", flops_eltwise(n, 8));
    return seal(out, [n](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t i = 0; i < n; ++i) {
            const size_t u = static_cast<size_t>(i);
            const double x = p.data[u];
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            p.grad[u] += o.grad[u] * (cdf + x * pdf);
        }
    });
}

Tensor sqrt_elem(const Tensor& a) {
    Tensor out = make_output(a.shape(), "sqrt", {a});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = std::sqrt(a.at(i));
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t i = 0; i < n; ++i) {
            const size_t u = static_cast<size_t>(i);
            p.grad[u] += o.grad[u] * 0.5 / o.data[u];
        }
    });
}

Tensor abs_elem(const Tensor& a) {
    Tensor out = make_output(a.shape(), "abs", {a});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = std::fabs(a.at(i));
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t i = 0; i < n; ++i) {
            const size_t u = static_cast<size_t>(i);
            const double x = p.data[u];
            p.grad[u] += o.grad[u] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
        }
    });
}

Tensor clamp_min(const Tensor& a, double floor) {
    Tensor out = make_output(a.shape(), "clamp_min", {a});
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.mutable_data()[i] = std::max(a.at(i), floor);
    meter_add("eltwise", flops_eltwise(n));
    return seal(out, [n, floor](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t i = 0; i < n; ++i) {
            const size_t u = static_cast<size_t>(i);
            if (p.data[u] > floor) p.grad[u] += o.grad[u];
        }
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    if (x.rank() < 1 || v.rank() != 1 || v.dim(0) != x.shape().back()) {
        throw ShapeError("add_rowvec: vector " + shape_str(v.shape()) +
                         " does not match last dim of " + shape_str(x.shape()));
    }
    const int64_t k = v.dim(0);
    const int64_t rows = x.numel() / k;
    Tensor out = make_output(x.shape(), "add_rowvec", {x, v});
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < k; ++j) {
            out.mutable_data()[r * k + j] = x.at(r * k + j) + v.at(j);
        }
    }
    meter_add("eltwise", flops_eltwise(out.numel()));
    return seal(out, [rows, k](TensorImpl& o) {
        TensorImpl& px = o.parents[0].impl();
        TensorImpl& pv = o.parents[1].impl();
        for (int64_t r = 0; r < rows; ++r) {
            for (int64_t j = 0; j < k; ++j) {
                const size_t u = static_cast<size_t>(r * k + j);
                if (px.requires_grad) px.grad[u] += o.grad[u];
                if (pv.requires_grad) pv.grad[static_cast<size_t>(j)] += o.grad[u];
            }
        }
    });
}

Tensor reshape(const Tensor& x, const std::vector<int>& new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                         " changes element count");
    }
    Tensor out = make_output(new_shape, "reshape", {x});
    out.mutable_data() = x.data();
    return seal(out, [](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (size_t i = 0; i < o.grad.size(); ++i) p.grad[i] += o.grad[i];
    });
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    const int r = x.rank();
    if (static_cast<int>(axes.size()) != r) {
        throw ShapeError("permute: need " + std::to_string(r) + " axes for " +
                         shape_str(x.shape()));
    }
    std::vector<bool> seen(static_cast<size_t>(r), false);
    std::vector<int> out_shape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        const int ax = axes[static_cast<size_t>(i)];
        if (ax < 0 || ax >= r || seen[static_cast<size_t>(ax)]) {
            throw ShapeError("permute: invalid axis list");
        }
        seen[static_cast<size_t>(ax)] = true;
        out_shape[static_cast<size_t>(i)] = x.dim(ax);
    }
    Tensor out = make_output(out_shape, "permute", {x});
    const auto in_strides = row_major_strides(x.shape());
    const auto out_strides = row_major_strides(out_shape);
    const int64_t n = x.numel();
    // out[i0,..] = in[axes[0]-th index, ..]; walk output linearly.
    std::vector<int64_t> in_stride_for_out(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        in_stride_for_out[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(axes[static_cast<size_t>(i)])];
    }
    for (int64_t o = 0; o < n; ++o) {
        int64_t rem = o;
        int64_t src = 0;
        for (int i = 0; i < r; ++i) {
            const int64_t idx = rem / out_strides[static_cast<size_t>(i)];
            rem -= idx * out_strides[static_cast<size_t>(i)];
            src += idx * in_stride_for_out[static_cast<size_t>(i)];
        }
        out.mutable_data()[static_cast<size_t>(o)] = x.at(src);
    }
    return seal(out, [out_strides, in_stride_for_out, n, r](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t oi = 0; oi < n; ++oi) {
            int64_t rem = oi;
            int64_t src = 0;
            for (int i = 0; i < r; ++i) {
                const int64_t idx = rem / out_strides[static_cast<size_t>(i)];
                rem -= idx * out_strides[static_cast<size_t>(i)];
                src += idx * in_stride_for_out[static_cast<size_t>(i)];
            }
            p.grad[static_cast<size_t>(src)] += o.grad[static_cast<size_t>(oi)];
        }
    });
}

Tensor narrow(const Tensor& x, int axis, int start, int length) {
    const int r = x.rank();
    if (axis < 0 || axis >= r) throw ShapeError("narrow: axis out of range");
    const int alen = x.dim(axis);
    if (start < 0 || length < 1 || start + length > alen) {
        throw ShapeError("narrow: window [" + std::to_string(start) + "," +
                         std::to_string(start + length) + ") exceeds dim " + std::to_string(alen));
    }
    std::vector<int> out_shape = x.shape();
    out_shape[static_cast<size_t>(axis)] = length;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
    Tensor out = make_output(out_shape, "narrow", {x});
    for (int64_t o = 0; o < outer; ++o) {
        const double* src = x.data().data() + (o * alen + start) * inner;
        double* dst = out.mutable_data().data() + o * length * inner;
        std::memcpy(dst, src, static_cast<size_t>(length * inner) * sizeof(double));
    }
    return seal(out, [outer, inner, alen, start, length](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t ot = 0; ot < outer; ++ot) {
            const double* g = o.grad.data() + ot * length * inner;
            double* dst = p.grad.data() + (ot * alen + start) * inner;
            for (int64_t i = 0; i < length * inner; ++i) dst[i] += g[i];
        }
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const int r = parts[0].rank();
    if (axis < 0 || axis >= r) throw ShapeError("concat: axis out of range");
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != r) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < r; ++i) {
            if (i != axis && p.dim(i) != parts[0].dim(i)) {
                throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(parts[0].shape()));
            }
        }
        total += p.dim(axis);
    }
    std::vector<int> out_shape = parts[0].shape();
    out_shape[static_cast<size_t>(axis)] = total;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= parts[0].dim(i);
    for (int i = axis + 1; i < r; ++i) inner *= parts[0].dim(i);
    Tensor out = make_output(out_shape, "concat", parts);
    std::vector<int> seg(parts.size());
    for (size_t pi = 0; pi < parts.size(); ++pi) seg[pi] = parts[pi].dim(axis);
    for (int64_t o = 0; o < outer; ++o) {
        int64_t off = 0;
        for (size_t pi = 0; pi < parts.size(); ++pi) {
            const int64_t block = static_cast<int64_t>(seg[pi]) * inner;
            std::memcpy(out.mutable_data().data() + (o * total + off) * inner,
                        parts[pi].data().data() + o * block,
                        static_cast<size_t>(block) * sizeof(double));
            off += seg[pi];
        }
    }
    return seal(out, [outer, inner, total, seg](TensorImpl& o) {
        for (int64_t ot = 0; ot < outer; ++ot) {
            int64_t off = 0;
            for (size_t pi = 0; pi < o.parents.size(); ++pi) {
                TensorImpl& p = o.parents[pi].impl();
                const int64_t block = static_cast<int64_t>(seg[pi]) * inner;
                if (p.requires_grad) {
                    const double* g = o.grad.data() + (ot * total + off) * inner;
                    double* dst = p.grad.data() + ot * block;
                    for (int64_t i = 0; i < block; ++i) dst[i] += g[i];
                }
                off += seg[pi];
            }
        }
    });
}

Tensor sum_all(const Tensor& x) {
    Tensor out = make_output({}, "sum_all", {x});
    double s = 0.0;
    for (double v : x.data()) s += v;
    out.mutable_data()[0] = s;
    meter_add("eltwise", flops_eltwise(x.numel()));
    return seal(out, [](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        const double g = o.grad[0];
        for (auto& gv : p.grad) gv += g;
    });
}

Tensor sum_lastdim(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("sum_lastdim: rank-0 input");
    const int64_t k = x.shape().back();
    const int64_t rows = x.numel() / k;
    std::vector<int> out_shape(x.shape().begin(), x.shape().end() - 1);
    Tensor out = make_output(out_shape, "sum_lastdim", {x});
    for (int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int64_t j = 0; j < k; ++j) s += x.at(r * k + j);
        out.mutable_data()[static_cast<size_t>(r)] = s;
    }
    meter_add("eltwise", flops_eltwise(x.numel()));
    return seal(out, [rows, k](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t r = 0; r < rows; ++r) {
            const double g = o.grad[static_cast<size_t>(r)];
            for (int64_t j = 0; j < k; ++j) p.grad[static_cast<size_t>(r * k + j)] += g;
        }
    });
}

Tensor spatial_mean(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("spatial_mean: expected [B,C,H,W], got " + shape_str(x.shape()));
    const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t hw = h * w;
    Tensor out = make_output({static_cast<int>(b), static_cast<int>(c)}, "spatial_mean", {x});
    for (int64_t bc = 0; bc < b * c; ++bc) {
        double s = 0.0;
        for (int64_t i = 0; i < hw; ++i) s += x.at(bc * hw + i);
        out.mutable_data()[static_cast<size_t>(bc)] = s / static_cast<double>(hw);
    }
    meter_add("eltwise", flops_eltwise(x.numel()) + flops_eltwise(out.numel()));
    return seal(out, [b, c, hw](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t bc = 0; bc < b * c; ++bc) {
            const double g = o.grad[static_cast<size_t>(bc)] / static_cast<double>(hw);
            for (int64_t i = 0; i < hw; ++i) p.grad[static_cast<size_t>(bc * hw + i)] += g;
        }
    });
}

Tensor broadcast_spatial(const Tensor& m, int h, int w) {
    if (m.rank() != 2) throw ShapeError("broadcast_spatial: expected [B,C], got " + shape_str(m.shape()));
    const int64_t b = m.dim(0), c = m.dim(1);
    const int64_t hw = static_cast<int64_t>(h) * w;
    Tensor out = make_output({static_cast<int>(b), static_cast<int>(c), h, w}, "broadcast_spatial", {m});
    for (int64_t bc = 0; bc < b * c; ++bc) {
        const double v = m.at(bc);
        for (int64_t i = 0; i < hw; ++i) out.mutable_data()[static_cast<size_t>(bc * hw + i)] = v;
    }
    return seal(out, [b, c, hw](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t bc = 0; bc < b * c; ++bc) {
            double s = 0.0;
            for (int64_t i = 0; i < hw; ++i) s += o.grad[static_cast<size_t>(bc * hw + i)];
            p.grad[static_cast<size_t>(bc)] += s;
        }
    });
}

namespace {

struct MatmulPlan {
    int64_t batch = 1;
    int64_t m = 0, k = 0, n = 0;
    std::vector<int64_t> a_off;  // per-batch offsets in units of M*K
    std::vector<int64_t> b_off;  // per-batch offsets in units of K*N
    std::vector<int> out_shape;
};

MatmulPlan plan_matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw ShapeError("matmul: both inputs need rank >= 2, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    MatmulPlan plan;
    plan.m = a.dim(a.rank() - 2);
    plan.k = a.dim(a.rank() - 1);
    const int64_t kb = b.dim(b.rank() - 2);
    plan.n = b.dim(b.rank() - 1);
    if (plan.k != kb) {
        throw ShapeError("matmul: inner dims disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const std::vector<int> ba(a.shape().begin(), a.shape().end() - 2);
    const std::vector<int> bb(b.shape().begin(), b.shape().end() - 2);
    const size_t br = std::max(ba.size(), bb.size());
    std::vector<int> batch_shape(br, 1);
    for (size_t i = 0; i < br; ++i) {
        const int da = i < ba.size() ? ba[ba.size() - 1 - i] : 1;
        const int db = i < bb.size() ? bb[bb.size() - 1 - i] : 1;
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("matmul: batch dims not broadcastable, " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
        }
        batch_shape[br - 1 - i] = std::max(da, db);
    }
    plan.batch = shape_numel(batch_shape);
    plan.a_off.resize(static_cast<size_t>(plan.batch));
    plan.b_off.resize(static_cast<size_t>(plan.batch));
    const auto bst = row_major_strides(batch_shape);
    // strides of a/b batch blocks, right-aligned, 0 where broadcast
    std::vector<int64_t> ast(br, 0), bbst(br, 0);
    {
        int64_t s = 1;
        for (size_t i = 0; i < ba.size(); ++i) {
            const size_t j = ba.size() - 1 - i;
            ast[br - 1 - i] = ba[j] == 1 ? 0 : s;
            s *= ba[j];
        }
        s = 1;
        for (size_t i = 0; i < bb.size(); ++i) {
            const size_t j = bb.size() - 1 - i;
            bbst[br - 1 - i] = bb[j] == 1 ? 0 : s;
            s *= bb[j];
        }
    }
    for (int64_t t = 0; t < plan.batch; ++t) {
        int64_t rem = t, ao = 0, bo = 0;
        for (size_t i = 0; i < br; ++i) {
            const int64_t idx = rem / bst[i];
            rem -= idx * bst[i];
            ao += idx * ast[i];
            bo += idx * bbst[i];
        }
        plan.a_off[static_cast<size_t>(t)] = ao;
        plan.b_off[static_cast<size_t>(t)] = bo;
    }
    plan.out_shape = batch_shape;
    plan.out_shape.push_back(static_cast<int>(plan.m));
    plan.out_shape.push_back(static_cast<int>(plan.n));
    return plan;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const MatmulPlan plan = plan_matmul(a, b);
    Tensor out = make_output(plan.out_shape, "matmul", {a, b});
    const int64_t M = plan.m, K = plan.k, N = plan.n;
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.mutable_data().data();
    for (int64_t t = 0; t < plan.batch; ++t) {
        const double* at = ad + plan.a_off[static_cast<size_t>(t)] * M * K;
        const double* bt = bd + plan.b_off[static_cast<size_t>(t)] * K * N;
        double* ot = od + t * M * N;
        for (int64_t i = 0; i < M; ++i) {
            double* orow = ot + i * N;
            for (int64_t kk = 0; kk < K; ++kk) {
                const double aik = at[i * K + kk];
                const double* brow = bt + kk * N;
                for (int64_t j = 0; j < N; ++j) orow[j] += aik * brow[j];
            }
        }
    }
    meter_add("matmul", flops_matmul(plan.batch, M, K, N));
    return seal(out, [plan](TensorImpl& o) {
        TensorImpl& pa = o.parents[0].impl();
        TensorImpl& pb = o.parents[1].impl();
        const int64_t M = plan.m, K = plan.k, N = plan.n;
        for (int64_t t = 0; t < plan.batch; ++t) {
            const double* gt = o.grad.data() + t * M * N;
            const double* at = pa.data.data() + plan.a_off[static_cast<size_t>(t)] * M * K;
            const double* bt = pb.data.data() + plan.b_off[static_cast<size_t>(t)] * K * N;
            if (pa.requires_grad) {
                double* gat = pa.grad.data() + plan.a_off[static_cast<size_t>(t)] * M * K;
                // dA = dC * B^T
                for (int64_t i = 0; i < M; ++i) {
                    for (int64_t kk = 0; kk < K; ++kk) {
                        double s = 0.0;
                        const double* grow = gt + i * N;
                        const double* brow = bt + kk * N;
                        for (int64_t j = 0; j < N; ++j) s += grow[j] * brow[j];
                        gat[i * K + kk] += s;
                    }
                }
            }
            if (pb.requires_grad) {
                double* gbt = pb.grad.data() + plan.b_off[static_cast<size_t>(t)] * K * N;
                // dB = A^T * dC
                for (int64_t i = 0; i < M; ++i) {
                    const double* grow = gt + i * N;
                    for (int64_t kk = 0; kk < K; ++kk) {
                        const double aik = at[i * K + kk];
                        double* gbrow = gbt + kk * N;
                        for (int64_t j = 0; j < N; ++j) gbrow[j] += aik * grow[j];
                    }
                }
            }
        }
    });
}

Tensor softmax(const Tensor& x, int axis) {
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("softmax: axis out of range for " + shape_str(x.shape()));
    int64_t outer = 1, inner = 1;
    const int64_t alen = x.dim(axis);
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
    Tensor out = make_output(x.shape(), "softmax", {x});
    const double* xd = x.data().data();
    double* od = out.mutable_data().data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * alen * inner + in;
            double mx = xd[base];
            for (int64_t j = 1; j < alen; ++j) mx = std::max(mx, xd[base + j * inner]);
            double sum = 0.0;
            for (int64_t j = 0; j < alen; ++j) {
                const double e = std::exp(xd[base + j * inner] - mx);
                od[base + j * inner] = e;
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (int64_t j = 0; j < alen; ++j) od[base + j * inner] *= inv;
        }
    }
    meter_add("softmax", flops_softmax(x.numel()));
    return seal(out, [outer, inner, alen](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t ot = 0; ot < outer; ++ot) {
            for (int64_t in = 0; in < inner; ++in) {
                const int64_t base = ot * alen * inner + in;
                double dot = 0.0;
                for (int64_t j = 0; j < alen; ++j) {
                    const size_t u = static_cast<size_t>(base + j * inner);
                    dot += o.grad[u] * o.data[u];
                }
                for (int64_t j = 0; j < alen; ++j) {
                    const size_t u = static_cast<size_t>(base + j * inner);
                    p.grad[u] += o.data[u] * (o.grad[u] - dot);
                }
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() < 1) throw ShapeError("layer_norm: rank-0 input");
    const int64_t d = x.shape().back();
    if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != d || beta.dim(0) != d) {
        throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(d) + "]");
    }
    const int64_t positions = x.numel() / d;
    Tensor out = make_output(x.shape(), "layer_norm", {x, gamma, beta});
    std::vector<double> xhat(static_cast<size_t>(x.numel()));
    std::vector<double> inv_std(static_cast<size_t>(positions));
    const double* xd = x.data().data();
    const double* gd = gamma.data().data();
    const double* bd = beta.data().data();
    double* od = out.mutable_data().data();
    for (int64_t p = 0; p < positions; ++p) {
        const double* row = xd + p * d;
        double mean = 0.0;
        for (int64_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const double c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(p)] = inv;
        for (int64_t j = 0; j < d; ++j) {
            const double h = (row[j] - mean) * inv;
            xhat[static_cast<size_t>(p * d + j)] = h;
            od[p * d + j] = h * gd[j] + bd[j];
        }
    }
    meter_add("layer_norm", flops_layer_norm(x.numel()));
    return seal(out, [positions, d, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](TensorImpl& o) {
        TensorImpl& px = o.parents[0].impl();
        TensorImpl& pg = o.parents[1].impl();
        TensorImpl& pb = o.parents[2].impl();
        const double* gd = pg.data.data();
        for (int64_t p = 0; p < positions; ++p) {
            const double* go = o.grad.data() + p * d;
            const double* h = xhat.data() + p * d;
            if (pg.requires_grad || pb.requires_grad) {
                for (int64_t j = 0; j < d; ++j) {
                    if (pg.requires_grad) pg.grad[static_cast<size_t>(j)] += go[j] * h[j];
                    if (pb.requires_grad) pb.grad[static_cast<size_t>(j)] += go[j];
                }
            }
            if (px.requires_grad) {
                double sum_dh = 0.0, sum_dh_h = 0.0;
                for (int64_t j = 0; j < d; ++j) {
                    const double dh = go[j] * gd[j];
                    sum_dh += dh;
                    sum_dh_h += dh * h[j];
                }
                const double inv = inv_std[static_cast<size_t>(p)];
                const double dinv = inv / static_cast<double>(d);
                for (int64_t j = 0; j < d; ++j) {
                    const double dh = go[j] * gd[j];
                    px.grad[static_cast<size_t>(p * d + j)] +=
                        dinv * (static_cast<double>(d) * dh - sum_dh - h[j] * sum_dh_h);
                }
            }
        }
    });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4) {
        throw ShapeError("conv2d: expected x[B,C,H,W], w[O,C,kh,kw], got " + shape_str(x.shape()) +
                         " and " + shape_str(w.shape()));
    }
    const int bsz = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int oc = w.dim(0), wc = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (wc != c) {
        throw ShapeError("conv2d: channel mismatch, x " + shape_str(x.shape()) + " vs w " +
                         shape_str(w.shape()));
    }
    if (!((kh == 1 && kw == 1) || (kh == 3 && kw == 3))) {
        throw ShapeError("conv2d: only 1x1 and 3x3 kernels supported");
    }
    if (b.rank() != 1 || b.dim(0) != oc) throw ShapeError("conv2d: bias must be [O]");
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    const int num_h = h + 2 * pad - kh;
    const int num_w = wd + 2 * pad - kw;
    if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0) {
        throw ShapeError("conv2d: non-integral output dims for input " + shape_str(x.shape()) +
                         ", kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
    }
    const int oh = num_h / stride + 1;
    const int ow = num_w / stride + 1;
    Tensor out = make_output({bsz, oc, oh, ow}, "conv2d", {x, w, b});
    const double* xd = x.data().data();
    const double* wdt = w.data().data();
    const double* bd = b.data().data();
    double* od = out.mutable_data().data();
    for (int bi = 0; bi < bsz; ++bi) {
        for (int o = 0; o < oc; ++o) {
            for (int yo = 0; yo < oh; ++yo) {
                for (int xo = 0; xo < ow; ++xo) {
                    double s = bd[o];
                    for (int ci = 0; ci < c; ++ci) {
                        for (int u = 0; u < kh; ++u) {
                            const int yi = yo * stride - pad + u;
                            if (yi < 0 || yi >= h) continue;
                            for (int v = 0; v < kw; ++v) {
                                const int xi = xo * stride - pad + v;
                                if (xi < 0 || xi >= wd) continue;
                                s += xd[((static_cast<int64_t>(bi) * c + ci) * h + yi) * wd + xi] *
                                     wdt[((static_cast<int64_t>(o) * c + ci) * kh + u) * kw + v];
                            }
                        }
                    }
                    od[((static_cast<int64_t>(bi) * oc + o) * oh + yo) * ow + xo] = s;
                }
            }
        }
    }
    meter_add("conv2d", flops_conv2d(out.numel(), c, kh, kw, true));
    return seal(out, [bsz, c, h, wd, oc, kh, kw, oh, ow, stride, pad](TensorImpl& o) {
        TensorImpl& px = o.parents[0].impl();
        TensorImpl& pw = o.parents[1].impl();
        TensorImpl& pb = o.parents[2].impl();
        for (int bi = 0; bi < bsz; ++bi) {
            for (int oi = 0; oi < oc; ++oi) {
                for (int yo = 0; yo < oh; ++yo) {
                    for (int xo = 0; xo < ow; ++xo) {
                        const double g =
                            o.grad[static_cast<size_t>(((static_cast<int64_t>(bi) * oc + oi) * oh + yo) * ow + xo)];
                        if (pb.requires_grad) pb.grad[static_cast<size_t>(oi)] += g;
                        for (int ci = 0; ci < c; ++ci) {
                            for (int u = 0; u < kh; ++u) {
                                const int yi = yo * stride - pad + u;
                                if (yi < 0 || yi >= h) continue;
                                for (int v = 0; v < kw; ++v) {
                                    const int xi = xo * stride - pad + v;
                                    if (xi < 0 || xi >= wd) continue;
                                    const size_t xoff = static_cast<size_t>(
                                        ((static_cast<int64_t>(bi) * c + ci) * h + yi) * wd + xi);
                                    const size_t woff = static_cast<size_t>(
                                        ((static_cast<int64_t>(oi) * c + ci) * kh + u) * kw + v);
                                    if (px.requires_grad) px.grad[xoff] += g * pw.data[woff];
                                    if (pw.requires_grad) pw.grad[woff] += g * px.data[xoff];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

Tensor avg_pool2(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("avg_pool2: expected [B,C,H,W]");
    const int bsz = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("avg_pool2: spatial dims must be even, got " + shape_str(x.shape()));
    }
    const int oh = h / 2, ow = w / 2;
    Tensor out = make_output({bsz, c, oh, ow}, "avg_pool2", {x});
    const double* xd = x.data().data();
    double* od = out.mutable_data().data();
    for (int64_t bc = 0; bc < static_cast<int64_t>(bsz) * c; ++bc) {
        const double* plane = xd + bc * h * w;
        double* oplane = od + bc * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int xq = 0; xq < ow; ++xq) {
                const double s = plane[(2 * y) * w + 2 * xq] + plane[(2 * y) * w + 2 * xq + 1] +
                                 plane[(2 * y + 1) * w + 2 * xq] +
                                 plane[(2 * y + 1) * w + 2 * xq + 1];
                oplane[y * ow + xq] = 0.25 * s;
            }
        }
    }
    meter_add("eltwise", flops_eltwise(x.numel()));
    return seal(out, [bsz, c, h, w, oh, ow](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t bc = 0; bc < static_cast<int64_t>(bsz) * c; ++bc) {
            const double* g = o.grad.data() + bc * oh * ow;
            double* dst = p.grad.data() + bc * h * w;
            for (int y = 0; y < oh; ++y) {
                for (int xq = 0; xq < ow; ++xq) {
                    const double gv = 0.25 * g[y * ow + xq];
                    dst[(2 * y) * w + 2 * xq] += gv;
                    dst[(2 * y) * w + 2 * xq + 1] += gv;
                    dst[(2 * y + 1) * w + 2 * xq] += gv;
                    dst[(2 * y + 1) * w + 2 * xq + 1] += gv;
                }
            }
        }
    });
}

Tensor upsample_nearest2(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("upsample_nearest2: expected [B,C,H,W]");
    const int bsz = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = 2 * h, ow = 2 * w;
    Tensor out = make_output({bsz, c, oh, ow}, "upsample_nearest2", {x});
    const double* xd = x.data().data();
    double* od = out.mutable_data().data();
    for (int64_t bc = 0; bc < static_cast<int64_t>(bsz) * c; ++bc) {
        const double* plane = xd + bc * h * w;
        double* oplane = od + bc * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const double* row = plane + (y / 2) * w;
            for (int xq = 0; xq < ow; ++xq) oplane[y * ow + xq] = row[xq / 2];
        }
    }
    return seal(out, [bsz, c, h, w, oh, ow](TensorImpl& o) {
        TensorImpl& p = o.parents[0].impl();
        if (!p.requires_grad) return;
        for (int64_t bc = 0; bc < static_cast<int64_t>(bsz) * c; ++bc) {
            const double* g = o.grad.data() + bc * oh * ow;
            double* dst = p.grad.data() + bc * h * w;
            for (int y = 0; y < oh; ++y) {
                for (int xq = 0; xq < ow; ++xq) dst[(y / 2) * w + xq / 2] += g[y * ow + xq];
            }
        }
    });
}

std::pair<Tensor, Tensor> instance_stats(const Tensor& x, double eps) {
    if (x.rank() != 4) throw ShapeError("instance_stats: expected [B,C,H,W]");
    const Tensor mu = spatial_mean(x);
    const Tensor centered = sub(x, broadcast_spatial(mu, x.dim(2), x.dim(3)));
    const Tensor var = spatial_mean(mul(centered, centered));
    const Tensor sigma = sqrt_elem(add_scalar(var, eps));
    return {mu, sigma};
}

Tensor detach(const Tensor& x) {
    return Tensor::from_data(x.shape(), x.data(), false);
}

Tensor l2_norm(const Tensor& x) { return sqrt_elem(sum_all(mul(x, x))); }

}  // namespace unist
