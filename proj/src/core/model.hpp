#pragma once

#include <string>
#include <vector>

#include "codec.hpp"
#include "dit.hpp"
#include "losses.hpp"

namespace unist {

struct ModelConfig {
    DitConfig dit;
    int codec_base_channels = 64;
};

struct StylizeMetrics {
    double d_c = 0.0;
    double d_s = 0.0;
    double gram_texture = 0.0;
    double color = 0.0;
};

struct StylizeResult {
    Tensor images;  // [T,3,H,W], raw decoder output
    StylizeMetrics metrics;
};

// Codec + DIT parameters under one seed. The codec encoder is initialized
// and then frozen; save/load round-trips every tensor plus the config.
struct Model {
    ModelConfig cfg;
    CodecParams codec;
    DitParams dit;

    static Model init(const ModelConfig& cfg, uint64_t seed);
    static Model load(const std::string& path);
    void save(const std::string& path) const;

    std::vector<Tensor> trainable_tensors() const;  // decoder + DIT

    // content: [T,3,H,W], style: [1,3,H,W]; metrics are computed on the
    // [0,1]-clamped outputs (what serialization writes).
    StylizeResult stylize(const Tensor& content, const Tensor& style) const;
};

}  // namespace unist
