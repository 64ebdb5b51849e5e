#pragma once

#include <string>
#include <utility>
#include <vector>

#include "attention.hpp"
#include "tensor.hpp"

namespace unist {

enum class GridKind { Content, Style, Stylized };

// A (T, H, W, D) stack of token maps; one spatial vector = one token.
struct TokenGrid {
    Tensor data;  // [T,H,W,D]
    GridKind kind = GridKind::Content;

    int frames() const { return data.dim(0); }
    int height() const { return data.dim(1); }
    int width() const { return data.dim(2); }
    int embed_dim() const { return data.dim(3); }
};

struct DitConfig {
    int n_c = 2;
    int n_s = 1;
    int n_t = 3;
    int embed_dim = 512;
    int heads = 8;
    bool interaction_enabled = true;
    bool unimodal = false;
    AmsaVariant variant = AmsaVariant::Standard;

    void validate() const;
};

// 1x1 convolution for locality strengthening ahead of each attention input.
struct ConvProj {
    Tensor w;  // [D,D,1,1]
    Tensor b;  // [D]

    static ConvProj init(int embed_dim, Rng& rng);
};

// Two pointwise layers, hidden width 4*D, GELU between.
struct FfnParams {
    Tensor w1, b1, w2, b2;

    static FfnParams init(int embed_dim, Rng& rng);
};

struct LnParams {
    Tensor gamma, beta;

    static LnParams init(int embed_dim);
};

struct EncoderBlockParams {
    ConvProj conv_q, conv_k, conv_v;
    AmsaParams attn;
    FfnParams ffn;
    LnParams ln_attn, ln_ffn;

    static EncoderBlockParams init(int embed_dim, int heads, Rng& rng);
    void collect(const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const;
};

struct DecoderBlockParams {
    ConvProj conv_q1, conv_k1, conv_v1;
    AmsaParams attn1;
    ConvProj conv_q2, conv_k2, conv_v2;
    AmsaParams attn2;
    FfnParams ffn;
    LnParams ln_attn1, ln_attn2, ln_ffn;

    static DecoderBlockParams init(int embed_dim, int heads, Rng& rng);
    void collect(const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const;
};

struct DitParams {
    std::vector<EncoderBlockParams> content_enc;  // n_c blocks
    std::vector<EncoderBlockParams> style_enc;    // n_s blocks
    EncoderBlockParams inter_video;               // Q from video half, K/V from image half
    EncoderBlockParams inter_image;               // the opposite wiring
    std::vector<DecoderBlockParams> decoder;      // n_t blocks

    static DitParams init(const DitConfig& cfg, Rng& rng);
    std::vector<Tensor> tensors() const;
    std::vector<std::pair<std::string, Tensor>> named_tensors() const;
};

Tensor conv_proj(const Tensor& grid, const ConvProj& p);
Tensor ffn_forward(const Tensor& x, const FfnParams& p);

// S' = LN(AMSA(Conv(Q), Conv(K), Conv(V)) + Q), S = LN(FFN(S') + S');
// Q = x_q, K = V = x_kv. Self-attention is the x_kv == x_q case.
TokenGrid encoder_block(const TokenGrid& x_q, const TokenGrid& x_kv,
                        const EncoderBlockParams& p, AmsaVariant variant);

// Two attention layers: first over (content, style, style), second re-reads
// the style grid with the intermediate as query, then the FFN. Layer norm
// after each residual sum.
TokenGrid decoder_block(const TokenGrid& content, const TokenGrid& style,
                        const DecoderBlockParams& p, AmsaVariant variant);

// Splits the content sequence into a video half and an image half and runs
// the two cross-attention encoder blocks, concatenating along T. Unimodal
// mode substitutes one self-attention block (reusing the video-block
// params); with interaction disabled this is the identity.
TokenGrid video_image_interaction(const TokenGrid& seq, const DitParams& p, const DitConfig& cfg);

// Full pipeline: content/style in-domain encoders, video-image interaction,
// then the content-style decoder stack. Output shape equals content shape.
TokenGrid dit_forward(const TokenGrid& content, const TokenGrid& style, const DitConfig& cfg,
                      const DitParams& params);

}  // namespace unist
