#pragma once

#include "codec.hpp"
#include "tensor.hpp"

namespace unist {

struct LossWeights {
    double lambda_c = 0.1;
    double lambda_s = 1.5;
    double lambda_t = 90.0;
    double lambda_id1 = 0.1;
    double lambda_id2 = 0.5;

    void validate() const;
};

// Sum over the four taps of the full-tensor Euclidean distance.
Tensor content_loss(const FeatureTaps& taps_cs, const FeatureTaps& taps_c);

// Sum over taps of the L2 distance between per-(batch, channel) spatial
// means plus the same for standard deviations. Norms run over the channel
// axis and are summed over batch; a single-item style tap is reused for
// every stylized frame.
Tensor style_loss(const FeatureTaps& taps_cs, const FeatureTaps& taps_s, double eps = 1e-5);

// lambda_id1 * pixel reconstruction terms + lambda_id2 * tap terms for the
// content-as-style and style-as-content passes.
Tensor identity_loss(const Tensor& cc, const Tensor& c, const Tensor& ss, const Tensor& s,
                     const FeatureTaps& taps_cc, const FeatureTaps& taps_c,
                     const FeatureTaps& taps_ss, const FeatureTaps& taps_s,
                     const LossWeights& w);

// Cross-image cosine-distance structure of a consecutive frame pair,
// compared between originals and stylized outputs; taps 3 and 4 only.
// Columns of each distance matrix are normalized by their sum over rows,
// and the mean absolute difference is taken over the full matrix. Cosine
// denominators (and degenerate column sums) are clamped at eps.
Tensor temporal_loss(const FeatureTaps& taps_c1, const FeatureTaps& taps_c2,
                     const FeatureTaps& taps_cs1, const FeatureTaps& taps_cs2,
                     double eps = 1e-8);

// lambda_c*Lc + lambda_s*Ls + Lid + lambda_t*Lt (identity enters unweighted
// at the top; its own factors live inside identity_loss).
Tensor total_loss(const Tensor& l_content, const Tensor& l_style, const Tensor& l_identity,
                  const Tensor& l_temporal, const LossWeights& w);

// Evaluation metrics: per-item losses averaged over the batch. Tape-free.
double metric_dc(const FeatureTaps& taps_cs, const FeatureTaps& taps_c);
double metric_ds(const FeatureTaps& taps_cs, const FeatureTaps& taps_s);

// Sum over taps of ||G(cs) - G(s)||_2 with G(F) = F F^T over channels
// normalized by C*H*W; averaged over batch.
double gram_texture_diff(const FeatureTaps& taps_cs, const FeatureTaps& taps_s);

// Euclidean distance between Gaussian-blurred images (21x21 kernel, sigma
// 3, borders renormalized so constants are preserved), mean over batch.
double color_diff(const Tensor& img_cs, const Tensor& img_s);

}  // namespace unist
