#include "dit.hpp"

#include "cost.hpp"
#include "ops.hpp"

namespace unist {

void DitConfig::validate() const {
    if (n_c < 1 || n_s < 1 || n_t < 1) {
        throw ConfigError("dit config: block counts must be >= 1");
    }
    if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0) {
        throw ConfigError("dit config: embed dim " + std::to_string(embed_dim) +
                          " must be divisible by heads " + std::to_string(heads));
    }
}

ConvProj ConvProj::init(int embed_dim, Rng& rng) {
    ConvProj p;
    p.w = Tensor::init_uniform({embed_dim, embed_dim, 1, 1}, embed_dim, rng);
    p.b = Tensor::init_uniform({embed_dim}, embed_dim, rng);
    return p;
}

FfnParams FfnParams::init(int embed_dim, Rng& rng) {
    const int hidden = 4 * embed_dim;
    FfnParams p;
    p.w1 = Tensor::init_uniform({embed_dim, hidden}, embed_dim, rng);
    p.b1 = Tensor::init_uniform({hidden}, embed_dim, rng);
    p.w2 = Tensor::init_uniform({hidden, embed_dim}, hidden, rng);
    p.b2 = Tensor::init_uniform({embed_dim}, hidden, rng);
    return p;
}

LnParams LnParams::init(int embed_dim) {
    LnParams p;
    p.gamma = Tensor::full({embed_dim}, 1.0, true);
    p.beta = Tensor::zeros({embed_dim}, true);
    return p;
}

EncoderBlockParams EncoderBlockParams::init(int embed_dim, int heads, Rng& rng) {
    EncoderBlockParams p;
    p.conv_q = ConvProj::init(embed_dim, rng);
    p.conv_k = ConvProj::init(embed_dim, rng);
    p.conv_v = ConvProj::init(embed_dim, rng);
    p.attn = AmsaParams::init(embed_dim, heads, rng);
    p.ffn = FfnParams::init(embed_dim, rng);
    p.ln_attn = LnParams::init(embed_dim);
    p.ln_ffn = LnParams::init(embed_dim);
    return p;
}

DecoderBlockParams DecoderBlockParams::init(int embed_dim, int heads, Rng& rng) {
    DecoderBlockParams p;
    p.conv_q1 = ConvProj::init(embed_dim, rng);
    p.conv_k1 = ConvProj::init(embed_dim, rng);
    p.conv_v1 = ConvProj::init(embed_dim, rng);
    p.attn1 = AmsaParams::init(embed_dim, heads, rng);
    p.conv_q2 = ConvProj::init(embed_dim, rng);
    p.conv_k2 = ConvProj::init(embed_dim, rng);
    p.conv_v2 = ConvProj::init(embed_dim, rng);
    p.attn2 = AmsaParams::init(embed_dim, heads, rng);
    p.ffn = FfnParams::init(embed_dim, rng);
    p.ln_attn1 = LnParams::init(embed_dim);
    p.ln_attn2 = LnParams::init(embed_dim);
    p.ln_ffn = LnParams::init(embed_dim);
    return p;
}

namespace {

void collect_conv(const std::string& prefix, const ConvProj& c,
                  std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(prefix + ".w", c.w);
    out.emplace_back(prefix + ".b", c.b);
}

void collect_amsa(const std::string& prefix, const AmsaParams& a,
                  std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(prefix + ".s1.wq", a.stage1.wq);
    out.emplace_back(prefix + ".s1.wk", a.stage1.wk);
    out.emplace_back(prefix + ".s1.wv", a.stage1.wv);
    out.emplace_back(prefix + ".s1.wo", a.stage1.wo);
    out.emplace_back(prefix + ".s2.wq", a.stage2.wq);
    out.emplace_back(prefix + ".s2.wk", a.stage2.wk);
    out.emplace_back(prefix + ".s2.wv", a.stage2.wv);
    out.emplace_back(prefix + ".s2.wo", a.stage2.wo);
    out.emplace_back(prefix + ".ln1.g", a.ln1_gamma);
    out.emplace_back(prefix + ".ln1.b", a.ln1_beta);
    out.emplace_back(prefix + ".ln2.g", a.ln2_gamma);
    out.emplace_back(prefix + ".ln2.b", a.ln2_beta);
}

void collect_ffn(const std::string& prefix, const FfnParams& f,
                 std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(prefix + ".w1", f.w1);
    out.emplace_back(prefix + ".b1", f.b1);
    out.emplace_back(prefix + ".w2", f.w2);
    out.emplace_back(prefix + ".b2", f.b2);
}

void collect_ln(const std::string& prefix, const LnParams& l,
                std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(prefix + ".g", l.gamma);
    out.emplace_back(prefix + ".b", l.beta);
}

}  // namespace

void EncoderBlockParams::collect(const std::string& prefix,
                                 std::vector<std::pair<std::string, Tensor>>& out) const {
    collect_conv(prefix + ".cq", conv_q, out);
    collect_conv(prefix + ".ck", conv_k, out);
    collect_conv(prefix + ".cv", conv_v, out);
    collect_amsa(prefix + ".attn", attn, out);
    collect_ffn(prefix + ".ffn", ffn, out);
    collect_ln(prefix + ".ln_attn", ln_attn, out);
    collect_ln(prefix + ".ln_ffn", ln_ffn, out);
}

void DecoderBlockParams::collect(const std::string& prefix,
                                 std::vector<std::pair<std::string, Tensor>>& out) const {
    collect_conv(prefix + ".cq1", conv_q1, out);
    collect_conv(prefix + ".ck1", conv_k1, out);
    collect_conv(prefix + ".cv1", conv_v1, out);
    collect_amsa(prefix + ".attn1", attn1, out);
    collect_conv(prefix + ".cq2", conv_q2, out);
    collect_conv(prefix + ".ck2", conv_k2, out);
    collect_conv(prefix + ".cv2", conv_v2, out);
    collect_amsa(prefix + ".attn2", attn2, out);
    collect_ffn(prefix + ".ffn", ffn, out);
    collect_ln(prefix + ".ln_attn1", ln_attn1, out);
    collect_ln(prefix + ".ln_attn2", ln_attn2, out);
    collect_ln(prefix + ".ln_ffn", ln_ffn, out);
}

DitParams DitParams::init(const DitConfig& cfg, Rng& rng) {
    cfg.validate();
    DitParams p;
    for (int i = 0; i < cfg.n_c; ++i) {
        p.content_enc.push_back(EncoderBlockParams::init(cfg.embed_dim, cfg.heads, rng));
    }
    for (int i = 0; i < cfg.n_s; ++i) {
        p.style_enc.push_back(EncoderBlockParams::init(cfg.embed_dim, cfg.heads, rng));
    }
    p.inter_video = EncoderBlockParams::init(cfg.embed_dim, cfg.heads, rng);
    p.inter_image = EncoderBlockParams::init(cfg.embed_dim, cfg.heads, rng);
    for (int i = 0; i < cfg.n_t; ++i) {
        p.decoder.push_back(DecoderBlockParams::init(cfg.embed_dim, cfg.heads, rng));
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> DitParams::named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t i = 0; i < content_enc.size(); ++i) {
        content_enc[i].collect("dit.enc_c" + std::to_string(i), out);
    }
    for (size_t i = 0; i < style_enc.size(); ++i) {
        style_enc[i].collect("dit.enc_s" + std::to_string(i), out);
    }
    inter_video.collect("dit.inter_v", out);
    inter_image.collect("dit.inter_i", out);
    for (size_t i = 0; i < decoder.size(); ++i) {
        decoder[i].collect("dit.dec" + std::to_string(i), out);
    }
    return out;
}

std::vector<Tensor> DitParams::tensors() const {
    std::vector<Tensor> out;
    for (const auto& [name, t] : named_tensors()) out.push_back(t);
    return out;
}

Tensor conv_proj(const Tensor& grid, const ConvProj& p) {
    // [T,H,W,D] -> [T,D,H,W] -> 1x1 conv -> back
    Tensor x = permute(grid, {0, 3, 1, 2});
    Tensor y = conv2d(x, p.w, p.b, 1, 0);
    return permute(y, {0, 2, 3, 1});
}

Tensor ffn_forward(const Tensor& x, const FfnParams& p) {
    MeterScope ms("ffn");
    const int d = x.shape().back();
    const int64_t positions = x.numel() / d;
    Tensor flat = reshape(x, {static_cast<int>(positions), d});
    Tensor h = add_rowvec(matmul(flat, p.w1), p.b1);
    h = gelu(h);
    Tensor out = add_rowvec(matmul(h, p.w2), p.b2);
    return reshape(out, x.shape());
}

namespace {

void check_grid_pair(const TokenGrid& a, const TokenGrid& b, const char* op) {
    if (a.height() != b.height() || a.width() != b.width() || a.embed_dim() != b.embed_dim()) {
        throw ShapeError(std::string(op) + ": grids disagree, " + shape_str(a.data.shape()) +
                         " vs " + shape_str(b.data.shape()));
    }
}

}  // namespace

TokenGrid encoder_block(const TokenGrid& x_q, const TokenGrid& x_kv,
                        const EncoderBlockParams& p, AmsaVariant variant) {
    check_grid_pair(x_q, x_kv, "encoder_block");
    MeterScope ms("encoder_block");
    Tensor attn_out = amsa(conv_proj(x_q.data, p.conv_q), conv_proj(x_kv.data, p.conv_k),
                           conv_proj(x_kv.data, p.conv_v), p.attn, variant);
    Tensor s1 = layer_norm(add(attn_out, x_q.data), p.ln_attn.gamma, p.ln_attn.beta);
    Tensor s2 = layer_norm(add(ffn_forward(s1, p.ffn), s1), p.ln_ffn.gamma, p.ln_ffn.beta);
    return {s2, x_q.kind};
}

TokenGrid decoder_block(const TokenGrid& content, const TokenGrid& style,
                        const DecoderBlockParams& p, AmsaVariant variant) {
    check_grid_pair(content, style, "decoder_block");
    if (style.frames() != 1 && style.frames() != content.frames()) {
        throw ShapeError("decoder_block: style frames must be 1 or match content, got " +
                         shape_str(style.data.shape()));
    }
    MeterScope ms("decoder_block");
    Tensor a1 = amsa(conv_proj(content.data, p.conv_q1), conv_proj(style.data, p.conv_k1),
                     conv_proj(style.data, p.conv_v1), p.attn1, variant);
    Tensor s1 = layer_norm(add(a1, content.data), p.ln_attn1.gamma, p.ln_attn1.beta);
    Tensor a2 = amsa(conv_proj(s1, p.conv_q2), conv_proj(style.data, p.conv_k2),
                     conv_proj(style.data, p.conv_v2), p.attn2, variant);
    Tensor s2 = layer_norm(add(a2, s1), p.ln_attn2.gamma, p.ln_attn2.beta);
    Tensor s3 = layer_norm(add(ffn_forward(s2, p.ffn), s2), p.ln_ffn.gamma, p.ln_ffn.beta);
    return {s3, GridKind::Stylized};
}

TokenGrid video_image_interaction(const TokenGrid& seq, const DitParams& p,
                                  const DitConfig& cfg) {
    if (!cfg.interaction_enabled) return seq;
    MeterScope ms("interaction");
    if (cfg.unimodal) {
        return encoder_block(seq, seq, p.inter_video, cfg.variant);
    }
    const int t = seq.frames();
    if (t % 2 != 0) {
        throw ConfigError("video_image_interaction: bimodal mode needs an even frame count, got " +
                          std::to_string(t));
    }
    const int half = t / 2;
    TokenGrid video{narrow(seq.data, 0, 0, half), seq.kind};
    TokenGrid image{narrow(seq.data, 0, half, half), seq.kind};
    TokenGrid out_v = encoder_block(video, image, p.inter_video, cfg.variant);
    TokenGrid out_i = encoder_block(image, video, p.inter_image, cfg.variant);
    return {concat({out_v.data, out_i.data}, 0), seq.kind};
}

TokenGrid dit_forward(const TokenGrid& content, const TokenGrid& style, const DitConfig& cfg,
                      const DitParams& params) {
    cfg.validate();
    if (content.kind != GridKind::Content) throw ConfigError("dit_forward: first grid must be content");
    if (style.kind != GridKind::Style) throw ConfigError("dit_forward: second grid must be style");
    if (style.frames() != 1 && style.frames() != content.frames()) {
        throw ShapeError("dit_forward: style frames must be 1 (or match content for identity passes)");
    }
    MeterScope ms("dit");
    TokenGrid c = content;
    for (const auto& block : params.content_enc) c = encoder_block(c, c, block, cfg.variant);
    TokenGrid s = style;
    for (const auto& block : params.style_enc) s = encoder_block(s, s, block, cfg.variant);
    c = video_image_interaction(c, params, cfg);
    TokenGrid out = c;
    for (const auto& block : params.decoder) out = decoder_block(out, s, block, cfg.variant);
    out.kind = GridKind::Stylized;
    return out;
}

}  // namespace unist
