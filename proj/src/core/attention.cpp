#include "attention.hpp"

#include <cmath>

#include "cost.hpp"
#include "ops.hpp"

namespace unist {

AttnParams AttnParams::init(int embed_dim, int heads, Rng& rng) {
    if (heads < 1 || embed_dim % heads != 0) {
        throw ConfigError("attention: embed dim " + std::to_string(embed_dim) +
                          " not divisible by " + std::to_string(heads) + " heads");
    }
    AttnParams p;
    p.heads = heads;
    p.wq = Tensor::init_uniform({embed_dim, embed_dim}, embed_dim, rng);
    p.wk = Tensor::init_uniform({embed_dim, embed_dim}, embed_dim, rng);
    p.wv = Tensor::init_uniform({embed_dim, embed_dim}, embed_dim, rng);
    p.wo = Tensor::init_uniform({embed_dim, embed_dim}, embed_dim, rng);
    return p;
}

AmsaParams AmsaParams::init(int embed_dim, int heads, Rng& rng) {
    AmsaParams p;
    p.stage1 = AttnParams::init(embed_dim, heads, rng);
    p.stage2 = AttnParams::init(embed_dim, heads, rng);
    p.ln1_gamma = Tensor::full({embed_dim}, 1.0, true);
    p.ln1_beta = Tensor::zeros({embed_dim}, true);
    p.ln2_gamma = Tensor::full({embed_dim}, 1.0, true);
    p.ln2_beta = Tensor::zeros({embed_dim}, true);
    return p;
}

std::vector<Tensor> AmsaParams::tensors() const {
    std::vector<Tensor> out = stage1.tensors();
    for (const Tensor& t : stage2.tensors()) out.push_back(t);
    out.push_back(ln1_gamma);
    out.push_back(ln1_beta);
    out.push_back(ln2_gamma);
    out.push_back(ln2_beta);
    return out;
}

Tensor msa(const Tensor& q, const Tensor& k, const Tensor& v, const AttnParams& p) {
    if (q.rank() != k.rank() || k.rank() != v.rank() || (q.rank() != 2 && q.rank() != 3)) {
        throw ShapeError("msa: q/k/v must all be [N,D] or [B,N,D], got " + shape_str(q.shape()) +
                         ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
    }
    const int d = p.embed_dim();
    if (q.shape().back() != d || k.shape().back() != d || v.shape().back() != d) {
        throw ShapeError("msa: embedding dim mismatch with params (D=" + std::to_string(d) +
                         "), q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()));
    }
    const bool batched = q.rank() == 3;
    const int b = batched ? q.dim(0) : 1;
    if (batched && (k.dim(0) != b || v.dim(0) != b)) {
        throw ShapeError("msa: batch mismatch, q " + shape_str(q.shape()) + " vs k " +
                         shape_str(k.shape()));
    }
    const int n = q.dim(q.rank() - 2);
    const int m = k.dim(k.rank() - 2);
    if (v.dim(v.rank() - 2) != m) {
        throw ShapeError("msa: k/v length mismatch, " + shape_str(k.shape()) + " vs " +
                         shape_str(v.shape()));
    }
    const int h = p.heads;
    const int dh = d / h;

    MeterScope ms("msa");
    Tensor qb = batched ? q : reshape(q, {1, n, d});
    Tensor kb = batched ? k : reshape(k, {1, m, d});
    Tensor vb = batched ? v : reshape(v, {1, m, d});

    Tensor qp, kp, vp;
    {
        MeterScope proj("proj");
        qp = matmul(qb, p.wq);
        kp = matmul(kb, p.wk);
        vp = matmul(vb, p.wv);
    }
    // [B,N,D] -> [B,h,N,dh]
    Tensor qh = permute(reshape(qp, {b, n, h, dh}), {0, 2, 1, 3});
    Tensor kh = permute(reshape(kp, {b, m, h, dh}), {0, 2, 1, 3});
    Tensor vh = permute(reshape(vp, {b, m, h, dh}), {0, 2, 1, 3});

    Tensor scores;
    {
        MeterScope sc("scores");
        scores = matmul(qh, permute(kh, {0, 1, 3, 2}));
    }
    scores = mul_scalar(scores, 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor attn = softmax(scores, -1);
    Tensor ctx;
    {
        MeterScope ws("attnsum");
        ctx = matmul(attn, vh);
    }
    // [B,h,N,dh] -> [B,N,D]
    Tensor merged = reshape(permute(ctx, {0, 2, 1, 3}), {b, n, d});
    Tensor out;
    {
        MeterScope proj("proj");
        out = matmul(merged, p.wo);
    }
    return batched ? out : reshape(out, {n, d});
}

namespace {

void check_amsa_shapes(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.rank() != 4 || k.rank() != 4 || v.rank() != 4) {
        throw ShapeError("amsa: q/k/v must be [T,H,W,D] grids, got " + shape_str(q.shape()) +
                         ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
    }
    if (k.shape() != v.shape()) {
        throw ShapeError("amsa: k/v shape mismatch, " + shape_str(k.shape()) + " vs " +
                         shape_str(v.shape()));
    }
    for (int i = 1; i < 4; ++i) {
        if (q.dim(i) != k.dim(i)) {
            throw ShapeError("amsa: spatial/embed mismatch between q " + shape_str(q.shape()) +
                             " and k " + shape_str(k.shape()));
        }
    }
    const int t = q.dim(0), tk = k.dim(0);
    if (tk != t && tk != 1) {
        throw ShapeError("amsa: k/v frame count must be 1 or match q, got q " +
                         shape_str(q.shape()) + ", k " + shape_str(k.shape()));
    }
}

Tensor broadcast_frames(const Tensor& g, int t) {
    if (g.dim(0) == t) return g;
    return concat(std::vector<Tensor>(static_cast<size_t>(t), g), 0);
}

struct AmsaStaged {
    Tensor f;         // stage-1 output, [T,H,W,D]
    Tensor k_frames;  // k broadcast to T frames
    Tensor v_frames;
};

AmsaStaged run_stage1(const Tensor& q, const Tensor& k, const Tensor& v, const AmsaParams& p) {
    check_amsa_shapes(q, k, v);
    const int t = q.dim(0), h = q.dim(1), w = q.dim(2), d = q.dim(3);
    AmsaStaged st;
    st.k_frames = broadcast_frames(k, t);
    st.v_frames = broadcast_frames(v, t);
    MeterScope s1("stage1");
    // isolate the width axis: every (t, w) column becomes one batch entry
    Tensor qc = reshape(permute(q, {0, 2, 1, 3}), {t * w, h, d});
    Tensor kc = reshape(permute(st.k_frames, {0, 2, 1, 3}), {t * w, h, d});
    Tensor vc = reshape(permute(st.v_frames, {0, 2, 1, 3}), {t * w, h, d});
    Tensor f0 = msa(qc, kc, vc, p.stage1);
    Tensor f1 = layer_norm(f0, p.ln1_gamma, p.ln1_beta);
    st.f = permute(reshape(f1, {t, w, h, d}), {0, 2, 1, 3});
    return st;
}

}  // namespace

Tensor amsa_stage1(const Tensor& q, const Tensor& k, const Tensor& v, const AmsaParams& p) {
    MeterScope ms("amsa");
    return run_stage1(q, k, v, p).f;
}

Tensor amsa(const Tensor& q, const Tensor& k, const Tensor& v, const AmsaParams& p,
            AmsaVariant variant) {
    MeterScope ms("amsa");
    AmsaStaged st = run_stage1(q, k, v, p);
    const int t = q.dim(0), h = q.dim(1), w = q.dim(2), d = q.dim(3);

    MeterScope s2("stage2");
    // every (t, h) row becomes one batch entry; [T,H,W,D] is already row-major
    Tensor fr = reshape(st.f, {t * h, w, d});
    Tensor q2 = fr, k2, v2;
    switch (variant) {
        case AmsaVariant::Standard:
            k2 = reshape(st.k_frames, {t * h, w, d});
            v2 = fr;
            break;
        case AmsaVariant::VariantA:
            k2 = fr;
            v2 = fr;
            break;
        case AmsaVariant::VariantB:
            k2 = reshape(st.k_frames, {t * h, w, d});
            v2 = reshape(st.v_frames, {t * h, w, d});
            break;
    }
    Tensor o0 = msa(q2, k2, v2, p.stage2);
    Tensor o1 = layer_norm(o0, p.ln2_gamma, p.ln2_beta);
    return reshape(o1, {t, h, w, d});
}

// --- loop oracle ------------------------------------------------------

namespace {

// out[i][.] = x[i][.] * W, W row-major [D,D]
void loop_project(const std::vector<double>& x, const std::vector<double>& w, int n, int d,
                  std::vector<double>& out) {
    out.assign(static_cast<size_t>(n) * d, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int e = 0; e < d; ++e) {
            const double xe = x[static_cast<size_t>(i) * d + e];
            for (int j = 0; j < d; ++j) {
                out[static_cast<size_t>(i) * d + j] += xe * w[static_cast<size_t>(e) * d + j];
            }
        }
    }
}

// plain per-token MSA on flat [N,D]/[M,D] buffers
void loop_msa(const std::vector<double>& q, const std::vector<double>& k,
              const std::vector<double>& v, int n, int m, int d, const AttnParams& p,
              std::vector<double>& out) {
    std::vector<double> qp, kp, vp;
    loop_project(q, p.wq.data(), n, d, qp);
    loop_project(k, p.wk.data(), m, d, kp);
    loop_project(v, p.wv.data(), m, d, vp);
    const int h = p.heads;
    const int dh = d / h;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> ctx(static_cast<size_t>(n) * d, 0.0);
    std::vector<double> logits(static_cast<size_t>(m));
    for (int hh = 0; hh < h; ++hh) {
        const int off = hh * dh;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) {
                double s = 0.0;
                for (int e = 0; e < dh; ++e) {
                    s += qp[static_cast<size_t>(i) * d + off + e] *
                         kp[static_cast<size_t>(j) * d + off + e];
                }
                logits[static_cast<size_t>(j)] = s * scale;
            }
            double mx = logits[0];
            for (int j = 1; j < m; ++j) mx = std::max(mx, logits[static_cast<size_t>(j)]);
            double denom = 0.0;
            for (int j = 0; j < m; ++j) {
                logits[static_cast<size_t>(j)] = std::exp(logits[static_cast<size_t>(j)] - mx);
                denom += logits[static_cast<size_t>(j)];
            }
            for (int j = 0; j < m; ++j) {
                const double a = logits[static_cast<size_t>(j)] / denom;
                for (int e = 0; e < dh; ++e) {
                    ctx[static_cast<size_t>(i) * d + off + e] +=
                        a * vp[static_cast<size_t>(j) * d + off + e];
                }
            }
        }
    }
    loop_project(ctx, p.wo.data(), n, d, out);
}

void loop_layer_norm(std::vector<double>& rows, int n, int d, const std::vector<double>& gamma,
                     const std::vector<double>& beta, double eps = 1e-5) {
    for (int i = 0; i < n; ++i) {
        double* row = rows.data() + static_cast<size_t>(i) * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) row[j] = (row[j] - mean) * inv * gamma[static_cast<size_t>(j)] + beta[static_cast<size_t>(j)];
    }
}

}  // namespace

Tensor axial_oracle(const Tensor& q, const Tensor& k, const Tensor& v, const AmsaParams& p,
                    AmsaVariant variant) {
    check_amsa_shapes(q, k, v);
    const int t = q.dim(0), h = q.dim(1), w = q.dim(2), d = q.dim(3);
    if (h > 8 || w > 8) {
        throw ConfigError("axial_oracle: intended for small grids (H, W <= 8)");
    }
    const int tk = k.dim(0);
    const auto& qd = q.data();
    const auto& kd = k.data();
    const auto& vd = v.data();
    auto grid_at = [&](const std::vector<double>& g, int tt, int hh, int ww, int dd) {
        return g[((static_cast<size_t>(tt) * h + hh) * w + ww) * d + dd];
    };

    // stage 1: height-axis attention per (t, w) column
    std::vector<double> f(static_cast<size_t>(t) * h * w * d, 0.0);
    std::vector<double> colq(static_cast<size_t>(h) * d), colk(static_cast<size_t>(h) * d),
        colv(static_cast<size_t>(h) * d), colo;
    for (int tt = 0; tt < t; ++tt) {
        const int tkv = tk == 1 ? 0 : tt;
        for (int ww = 0; ww < w; ++ww) {
            for (int hh = 0; hh < h; ++hh) {
                for (int dd = 0; dd < d; ++dd) {
                    colq[static_cast<size_t>(hh) * d + dd] = grid_at(qd, tt, hh, ww, dd);
                    colk[static_cast<size_t>(hh) * d + dd] = grid_at(kd, tkv, hh, ww, dd);
                    colv[static_cast<size_t>(hh) * d + dd] = grid_at(vd, tkv, hh, ww, dd);
                }
            }
            loop_msa(colq, colk, colv, h, h, d, p.stage1, colo);
            loop_layer_norm(colo, h, d, p.ln1_gamma.data(), p.ln1_beta.data());
            for (int hh = 0; hh < h; ++hh) {
                for (int dd = 0; dd < d; ++dd) {
                    f[((static_cast<size_t>(tt) * h + hh) * w + ww) * d + dd] =
                        colo[static_cast<size_t>(hh) * d + dd];
                }
            }
        }
    }

    // stage 2: width-axis attention per (t, h) row
    std::vector<double> out(static_cast<size_t>(t) * h * w * d, 0.0);
    std::vector<double> rowq(static_cast<size_t>(w) * d), rowk(static_cast<size_t>(w) * d),
        rowv(static_cast<size_t>(w) * d), rowo;
    for (int tt = 0; tt < t; ++tt) {
        const int tkv = tk == 1 ? 0 : tt;
        for (int hh = 0; hh < h; ++hh) {
            for (int ww = 0; ww < w; ++ww) {
                for (int dd = 0; dd < d; ++dd) {
                    const double fv = grid_at(f, tt, hh, ww, dd);
                    rowq[static_cast<size_t>(ww) * d + dd] = fv;
                    switch (variant) {
                        case AmsaVariant::Standard:
                            rowk[static_cast<size_t>(ww) * d + dd] = grid_at(kd, tkv, hh, ww, dd);
                            rowv[static_cast<size_t>(ww) * d + dd] = fv;
                            break;
                        case AmsaVariant::VariantA:
                            rowk[static_cast<size_t>(ww) * d + dd] = fv;
                            rowv[static_cast<size_t>(ww) * d + dd] = fv;
                            break;
                        case AmsaVariant::VariantB:
                            rowk[static_cast<size_t>(ww) * d + dd] = grid_at(kd, tkv, hh, ww, dd);
                            rowv[static_cast<size_t>(ww) * d + dd] = grid_at(vd, tkv, hh, ww, dd);
                            break;
                    }
                }
            }
            loop_msa(rowq, rowk, rowv, w, w, d, p.stage2, rowo);
            loop_layer_norm(rowo, w, d, p.ln2_gamma.data(), p.ln2_beta.data());
            for (int ww = 0; ww < w; ++ww) {
                for (int dd = 0; dd < d; ++dd) {
                    out[((static_cast<size_t>(tt) * h + hh) * w + ww) * d + dd] =
                        rowo[static_cast<size_t>(ww) * d + dd];
                }
            }
        }
    }
    return Tensor::from_data({t, h, w, d}, std::move(out));
}

AttnFlops attention_flops(int64_t n_q, int64_t n_kv, int64_t embed_dim, int64_t heads) {
    if (n_q < 1 || n_kv < 1 || embed_dim < 1 || heads < 1) {
        throw ConfigError("attention_flops: all arguments must be >= 1");
    }
    if (embed_dim % heads != 0) {
        throw ConfigError("attention_flops: embed dim not divisible by heads");
    }
    AttnFlops f;
    f.scores = 2 * n_q * n_kv * embed_dim;
    f.weighted_sum = 2 * n_q * n_kv * embed_dim;
    f.projections = 4 * embed_dim * embed_dim * (n_q + n_kv);
    return f;
}

}  // namespace unist
