#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace unist {

// Projection weights of one multi-head attention layer. Projections are
// bias-free; x is treated as rows, so a projection is x * W with W [D,D].
struct AttnParams {
    Tensor wq, wk, wv, wo;
    int heads = 1;

    static AttnParams init(int embed_dim, int heads, Rng& rng);
    std::vector<Tensor> tensors() const { return {wq, wk, wv, wo}; }
    int embed_dim() const { return wq.dim(0); }
};

// Wiring of the second axial stage. Standard keeps the original K and takes
// the first stage's normalized output as Q and V; VariantA feeds that output
// as Q, K and V; VariantB keeps both K and V from the original inputs.
enum class AmsaVariant { Standard, VariantA, VariantB };

// One axial attention layer: two MSA stages, each followed by a learnable
// layer normalization over the embedding dim.
struct AmsaParams {
    AttnParams stage1, stage2;
    Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;

    static AmsaParams init(int embed_dim, int heads, Rng& rng);
    std::vector<Tensor> tensors() const;
};

// Scaled dot-product multi-head attention. q: [N,D] or [B,N,D]; k, v:
// [M,D] or [B,M,D] with the same batch. Cross-attention is the k/v-from-
// another-sequence case. Scale is 1/sqrt(D/heads).
Tensor msa(const Tensor& q, const Tensor& k, const Tensor& v, const AttnParams& p);

// Axial multi-head self-attention over a token grid. q: [T,H,W,D]; k, v:
// [T',H,W,D] with T' in {1, T} (a T'=1 style grid is reused for every
// frame). Stage 1 attends along the height axis within each (t, w) column;
// stage 2 along the width axis within each (t, h) row, wired per variant.
// Output shape equals q's shape.
Tensor amsa(const Tensor& q, const Tensor& k, const Tensor& v, const AmsaParams& p,
            AmsaVariant variant);

// Stage 1 only (layer-normalized), exposed for the per-column equivalence
// checks.
Tensor amsa_stage1(const Tensor& q, const Tensor& k, const Tensor& v, const AmsaParams& p);

// Loop-based re-implementation of amsa with no reshapes and no tape, for
// equivalence testing. Small inputs only.
Tensor axial_oracle(const Tensor& q, const Tensor& k, const Tensor& v, const AmsaParams& p,
                    AmsaVariant variant);

// Analytic attention cost for one MSA call, multiply-add pairs counted as
// 2 FLOPs. Score computation and the weighted sum are the "score terms";
// the four projections are a separate line item.
struct AttnFlops {
    int64_t scores = 0;
    int64_t weighted_sum = 0;
    int64_t projections = 0;

    int64_t score_total() const { return scores + weighted_sum; }
    int64_t total() const { return scores + weighted_sum + projections; }
};

AttnFlops attention_flops(int64_t n_q, int64_t n_kv, int64_t embed_dim, int64_t heads);

}  // namespace unist
