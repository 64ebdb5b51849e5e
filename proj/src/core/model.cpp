#include "model.hpp"

#include <algorithm>

#include "checkpoint.hpp"
#include "ops.hpp"

namespace unist {

Model Model::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.dit.validate();
    Rng rng(seed);
    Model m;
    m.cfg = cfg;
    m.codec = CodecParams::init(cfg.codec_base_channels, cfg.dit.embed_dim, rng);
    m.dit = DitParams::init(cfg.dit, rng);
    return m;
}

namespace {

std::vector<uint32_t> config_ints(const ModelConfig& cfg) {
    return {static_cast<uint32_t>(cfg.dit.n_c),
            static_cast<uint32_t>(cfg.dit.n_s),
            static_cast<uint32_t>(cfg.dit.n_t),
            static_cast<uint32_t>(cfg.dit.embed_dim),
            static_cast<uint32_t>(cfg.dit.heads),
            cfg.dit.interaction_enabled ? 1u : 0u,
            cfg.dit.unimodal ? 1u : 0u,
            static_cast<uint32_t>(cfg.dit.variant),
            static_cast<uint32_t>(cfg.codec_base_channels)};
}

ModelConfig config_from_ints(const std::vector<uint32_t>& v) {
    if (v.size() != 9) throw IoError("checkpoint: unexpected config length");
    ModelConfig cfg;
    cfg.dit.n_c = static_cast<int>(v[0]);
    cfg.dit.n_s = static_cast<int>(v[1]);
    cfg.dit.n_t = static_cast<int>(v[2]);
    cfg.dit.embed_dim = static_cast<int>(v[3]);
    cfg.dit.heads = static_cast<int>(v[4]);
    cfg.dit.interaction_enabled = v[5] != 0;
    cfg.dit.unimodal = v[6] != 0;
    if (v[7] > 2) throw IoError("checkpoint: bad variant code");
    cfg.dit.variant = static_cast<AmsaVariant>(v[7]);
    cfg.codec_base_channels = static_cast<int>(v[8]);
    return cfg;
}

}  // namespace

void Model::save(const std::string& path) const {
    Checkpoint ckpt;
    ckpt.config = config_ints(cfg);
    for (const auto& entry : codec.named_tensors()) ckpt.tensors.push_back(entry);
    for (const auto& entry : dit.named_tensors()) ckpt.tensors.push_back(entry);
    save_checkpoint(ckpt, path);
}

Model Model::load(const std::string& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    const ModelConfig cfg = config_from_ints(ckpt.config);
    // materialize structure from config, then overwrite every tensor
    Model m = Model::init(cfg, 0);
    auto restore = [&ckpt](std::vector<std::pair<std::string, Tensor>> slots) {
        for (auto& [name, t] : slots) {
            const Tensor* stored = ckpt.find(name);
            if (!stored) throw IoError("checkpoint missing tensor '" + name + "'");
            if (stored->shape() != t.shape()) {
                throw IoError("checkpoint tensor '" + name + "' has shape " +
                              shape_str(stored->shape()) + ", expected " + shape_str(t.shape()));
            }
            Tensor dst = t;
            dst.mutable_data() = stored->data();
        }
    };
    restore(m.codec.named_tensors());
    restore(m.dit.named_tensors());
    return m;
}

std::vector<Tensor> Model::trainable_tensors() const {
    std::vector<Tensor> out = codec.decoder_tensors();
    for (const Tensor& t : dit.tensors()) out.push_back(t);
    return out;
}

StylizeResult Model::stylize(const Tensor& content, const Tensor& style) const {
    if (style.rank() != 4 || style.dim(0) != 1) {
        throw ShapeError("stylize: style must be a single [1,3,H,W] image");
    }
    NoGradGuard ng;
    const FeatureTaps taps_c = encode(content, codec);
    const FeatureTaps taps_s = encode(style, codec);
    TokenGrid seq_c = tokenize(taps_c);
    TokenGrid grid_s = tokenize(taps_s);
    grid_s.kind = GridKind::Style;
    const TokenGrid stylized = dit_forward(seq_c, grid_s, cfg.dit, dit);
    StylizeResult result;
    result.images = decode(stylized, codec);

    // metrics on the clamped images, matching what gets serialized
    Tensor clamped = Tensor::from_data(result.images.shape(), result.images.data());
    for (double& v : clamped.mutable_data()) v = std::clamp(v, 0.0, 1.0);
    const FeatureTaps taps_out = encode(clamped, codec);
    result.metrics.d_c = metric_dc(taps_out, taps_c);
    result.metrics.d_s = metric_ds(taps_out, taps_s);
    result.metrics.gram_texture = gram_texture_diff(taps_out, taps_s);
    Tensor style_rep = style;
    if (content.dim(0) > 1) {
        std::vector<Tensor> reps(static_cast<size_t>(content.dim(0)), style);
        style_rep = concat(reps, 0);
    }
    result.metrics.color = color_diff(clamped, style_rep);
    return result;
}

}  // namespace unist
