#include "losses.hpp"

#include <cmath>

#include "ops.hpp"

namespace unist {

void LossWeights::validate() const {
    if (lambda_c < 0 || lambda_s < 0 || lambda_t < 0 || lambda_id1 < 0 || lambda_id2 < 0) {
        throw ConfigError("loss weights must be nonnegative");
    }
}

namespace {

void require_taps_match(const FeatureTaps& a, const FeatureTaps& b, const char* op) {
    const auto ta = a.all(), tb = b.all();
    for (size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].shape() != tb[i].shape()) {
            throw ShapeError(std::string(op) + ": tap " + std::to_string(i + 1) +
                             " shape mismatch " + shape_str(ta[i].shape()) + " vs " +
                             shape_str(tb[i].shape()));
        }
    }
}

Tensor repeat_batch(const Tensor& x, int times) {
    if (times == 1) return x;
    return concat(std::vector<Tensor>(static_cast<size_t>(times), x), 0);
}

// sum over batch of the channel-axis L2 norm of a [B,C] difference
Tensor rowwise_l2_sum(const Tensor& diff) {
    return sum_all(sqrt_elem(sum_lastdim(mul(diff, diff))));
}

}  // namespace

Tensor content_loss(const FeatureTaps& taps_cs, const FeatureTaps& taps_c) {
    require_taps_match(taps_cs, taps_c, "content_loss");
    Tensor total = Tensor::scalar(0.0);
    const auto cs = taps_cs.all(), c = taps_c.all();
    for (size_t i = 0; i < cs.size(); ++i) total = add(total, l2_norm(sub(cs[i], c[i])));
    return total;
}

Tensor style_loss(const FeatureTaps& taps_cs, const FeatureTaps& taps_s, double eps) {
    const auto cs = taps_cs.all(), s = taps_s.all();
    Tensor total = Tensor::scalar(0.0);
    for (size_t i = 0; i < cs.size(); ++i) {
        if (cs[i].dim(1) != s[i].dim(1)) {
            throw ShapeError("style_loss: tap " + std::to_string(i + 1) + " channel mismatch " +
                             shape_str(cs[i].shape()) + " vs " + shape_str(s[i].shape()));
        }
        const int b_cs = cs[i].dim(0), b_s = s[i].dim(0);
        if (b_s != b_cs && b_s != 1) {
            throw ShapeError("style_loss: style batch must be 1 or match");
        }
        auto [mu_cs, sig_cs] = instance_stats(cs[i], eps);
        auto [mu_s, sig_s] = instance_stats(s[i], eps);
        if (b_s != b_cs) {
            mu_s = repeat_batch(mu_s, b_cs);
            sig_s = repeat_batch(sig_s, b_cs);
        }
        total = add(total, rowwise_l2_sum(sub(mu_cs, mu_s)));
        total = add(total, rowwise_l2_sum(sub(sig_cs, sig_s)));
    }
    return total;
}

Tensor identity_loss(const Tensor& cc, const Tensor& c, const Tensor& ss, const Tensor& s,
                     const FeatureTaps& taps_cc, const FeatureTaps& taps_c,
                     const FeatureTaps& taps_ss, const FeatureTaps& taps_s,
                     const LossWeights& w) {
    if (cc.shape() != c.shape() || ss.shape() != s.shape()) {
        throw ShapeError("identity_loss: reconstruction shapes must match inputs");
    }
    require_taps_match(taps_cc, taps_c, "identity_loss");
    require_taps_match(taps_ss, taps_s, "identity_loss");
    Tensor pixel = add(l2_norm(sub(cc, c)), l2_norm(sub(ss, s)));
    Tensor taps = Tensor::scalar(0.0);
    const auto a1 = taps_cc.all(), a2 = taps_c.all(), b1 = taps_ss.all(), b2 = taps_s.all();
    for (size_t i = 0; i < a1.size(); ++i) {
        taps = add(taps, l2_norm(sub(a1[i], a2[i])));
        taps = add(taps, l2_norm(sub(b1[i], b2[i])));
    }
    return add(mul_scalar(pixel, w.lambda_id1), mul_scalar(taps, w.lambda_id2));
}

namespace {

// [1,C,H,W] tap slice -> [H*W, C] feature rows
Tensor tap_rows(const Tensor& tap, int item) {
    Tensor one = narrow(tap, 0, item, 1);
    const int c = tap.dim(1), n = tap.dim(2) * tap.dim(3);
    return permute(reshape(one, {c, n}), {1, 0});
}

// column-normalized cosine-distance matrix between two frames' features
Tensor normalized_distance(const Tensor& f_u, const Tensor& f_v, double eps) {
    const int n1 = f_u.dim(0), n2 = f_v.dim(0);
    Tensor g = matmul(f_u, permute(f_v, {1, 0}));
    Tensor nu = sqrt_elem(sum_lastdim(mul(f_u, f_u)));
    Tensor nv = sqrt_elem(sum_lastdim(mul(f_v, f_v)));
    Tensor denom = clamp_min(matmul(reshape(nu, {n1, 1}), reshape(nv, {1, n2})), eps);
    Tensor dist = add_scalar(mul_scalar(div(g, denom), -1.0), 1.0);
    Tensor colsum = clamp_min(sum_lastdim(permute(dist, {1, 0})), eps);  // [n2]
    Tensor ones = Tensor::full({n1, 1}, 1.0);
    return div(dist, matmul(ones, reshape(colsum, {1, n2})));
}

}  // namespace

Tensor temporal_loss(const FeatureTaps& taps_c1, const FeatureTaps& taps_c2,
                     const FeatureTaps& taps_cs1, const FeatureTaps& taps_cs2, double eps) {
    require_taps_match(taps_c1, taps_c2, "temporal_loss");
    require_taps_match(taps_cs1, taps_cs2, "temporal_loss");
    Tensor total = Tensor::scalar(0.0);
    const Tensor c1_taps[2] = {taps_c1.phi3, taps_c1.phi4};
    const Tensor c2_taps[2] = {taps_c2.phi3, taps_c2.phi4};
    const Tensor cs1_taps[2] = {taps_cs1.phi3, taps_cs1.phi4};
    const Tensor cs2_taps[2] = {taps_cs2.phi3, taps_cs2.phi4};
    for (int i = 0; i < 2; ++i) {
        const int batch = c1_taps[i].dim(0);
        const int64_t n1 = c1_taps[i].dim(2) * c1_taps[i].dim(3);
        const int64_t n2 = c2_taps[i].dim(2) * c2_taps[i].dim(3);
        for (int b = 0; b < batch; ++b) {
            Tensor dn_c =
                normalized_distance(tap_rows(c1_taps[i], b), tap_rows(c2_taps[i], b), eps);
            Tensor dn_cs =
                normalized_distance(tap_rows(cs1_taps[i], b), tap_rows(cs2_taps[i], b), eps);
            Tensor diff = sum_all(abs_elem(sub(dn_c, dn_cs)));
            total = add(total, mul_scalar(diff, 1.0 / static_cast<double>(n1 * n2)));
        }
    }
    return total;
}

Tensor total_loss(const Tensor& l_content, const Tensor& l_style, const Tensor& l_identity,
                  const Tensor& l_temporal, const LossWeights& w) {
    w.validate();
    Tensor total = mul_scalar(l_content, w.lambda_c);
    total = add(total, mul_scalar(l_style, w.lambda_s));
    total = add(total, l_identity);
    total = add(total, mul_scalar(l_temporal, w.lambda_t));
    return total;
}

namespace {

FeatureTaps taps_item(const FeatureTaps& taps, int b) {
    return {narrow(taps.phi1, 0, b, 1), narrow(taps.phi2, 0, b, 1), narrow(taps.phi3, 0, b, 1),
            narrow(taps.phi4, 0, b, 1)};
}

FeatureTaps taps_item_or_single(const FeatureTaps& taps, int b) {
    return taps.phi1.dim(0) == 1 ? taps : taps_item(taps, b);
}

}  // namespace

double metric_dc(const FeatureTaps& taps_cs, const FeatureTaps& taps_c) {
    NoGradGuard ng;
    const int batch = taps_cs.phi1.dim(0);
    double sum = 0.0;
    for (int b = 0; b < batch; ++b) {
        sum += content_loss(taps_item(taps_cs, b), taps_item(taps_c, b)).scalar_value();
    }
    return sum / batch;
}

double metric_ds(const FeatureTaps& taps_cs, const FeatureTaps& taps_s) {
    NoGradGuard ng;
    const int batch = taps_cs.phi1.dim(0);
    double sum = 0.0;
    for (int b = 0; b < batch; ++b) {
        sum += style_loss(taps_item(taps_cs, b), taps_item_or_single(taps_s, b)).scalar_value();
    }
    return sum / batch;
}

namespace {

// G(F) = F F^T over channels, normalized by C*H*W
Tensor gram(const Tensor& tap_item) {
    const int c = tap_item.dim(1);
    const int64_t hw = static_cast<int64_t>(tap_item.dim(2)) * tap_item.dim(3);
    Tensor f = reshape(tap_item, {c, static_cast<int>(hw)});
    return mul_scalar(matmul(f, permute(f, {1, 0})), 1.0 / static_cast<double>(c * hw));
}

}  // namespace

double gram_texture_diff(const FeatureTaps& taps_cs, const FeatureTaps& taps_s) {
    NoGradGuard ng;
    const auto cs = taps_cs.all(), s = taps_s.all();
    const int batch = cs[0].dim(0);
    double sum = 0.0;
    for (int b = 0; b < batch; ++b) {
        for (size_t i = 0; i < cs.size(); ++i) {
            if (cs[i].dim(1) != s[i].dim(1)) {
                throw ShapeError("gram_texture_diff: tap " + std::to_string(i + 1) +
                                 " channel mismatch");
            }
            const Tensor g_cs = gram(narrow(cs[i], 0, b, 1));
            const Tensor g_s = gram(narrow(s[i], 0, s[i].dim(0) == 1 ? 0 : b, 1));
            sum += l2_norm(sub(g_cs, g_s)).scalar_value();
        }
    }
    return sum / batch;
}

namespace {

// separable 21-tap Gaussian, sigma 3; each pass renormalizes by the
// in-bounds weight sum so constants survive the borders
void gaussian_blur_plane(const double* src, double* dst, int h, int w) {
    constexpr int kRadius = 10;
    static const std::vector<double> kKernel = [] {
        std::vector<double> k(2 * kRadius + 1);
        for (int i = -kRadius; i <= kRadius; ++i) {
            k[static_cast<size_t>(i + kRadius)] = std::exp(-(i * i) / (2.0 * 3.0 * 3.0));
        }
        return k;
    }();
    std::vector<double> tmp(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0, wsum = 0.0;
            for (int k = -kRadius; k <= kRadius; ++k) {
                const int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                const double g = kKernel[static_cast<size_t>(k + kRadius)];
                acc += g * src[static_cast<size_t>(y) * w + xx];
                wsum += g;
            }
            tmp[static_cast<size_t>(y) * w + x] = acc / wsum;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0, wsum = 0.0;
            for (int k = -kRadius; k <= kRadius; ++k) {
                const int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                const double g = kKernel[static_cast<size_t>(k + kRadius)];
                acc += g * tmp[static_cast<size_t>(yy) * w + x];
                wsum += g;
            }
            dst[static_cast<size_t>(y) * w + x] = acc / wsum;
        }
    }
}

}  // namespace

double color_diff(const Tensor& img_cs, const Tensor& img_s) {
    if (img_cs.shape() != img_s.shape() || img_cs.rank() != 4 || img_cs.dim(1) != 3) {
        throw ShapeError("color_diff: expected matching [B,3,H,W] images, got " +
                         shape_str(img_cs.shape()) + " vs " + shape_str(img_s.shape()));
    }
    const int batch = img_cs.dim(0), h = img_cs.dim(2), w = img_cs.dim(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    std::vector<double> blur_a(static_cast<size_t>(plane)), blur_b(static_cast<size_t>(plane));
    double sum = 0.0;
    for (int b = 0; b < batch; ++b) {
        double sq = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            const int64_t off = (static_cast<int64_t>(b) * 3 + ch) * plane;
            gaussian_blur_plane(img_cs.data().data() + off, blur_a.data(), h, w);
            gaussian_blur_plane(img_s.data().data() + off, blur_b.data(), h, w);
            for (int64_t i = 0; i < plane; ++i) {
                const double d = blur_a[static_cast<size_t>(i)] - blur_b[static_cast<size_t>(i)];
                sq += d * d;
            }
        }
        sum += std::sqrt(sq);
    }
    return sum / batch;
}

}  // namespace unist
