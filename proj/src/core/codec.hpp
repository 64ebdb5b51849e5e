#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dit.hpp"
#include "tensor.hpp"

namespace unist {

// Multi-scale feature taps at strides 1, 2, 4, 8 with channel widths
// (c, 2c, 4c, D). The stride-8 tap carries the token vectors.
struct FeatureTaps {
    Tensor phi1, phi2, phi3, phi4;

    std::vector<Tensor> all() const { return {phi1, phi2, phi3, phi4}; }
};

// Encoder convolutions are randomly initialized once and then frozen; the
// decoder mirrors the stack with learnable weights.
struct CodecParams {
    int base_channels = 64;
    int embed_dim = 512;

    Tensor enc_w1, enc_b1;  // 3 -> c, stride-1 tap
    Tensor enc_w2, enc_b2;  // c -> 2c after pool
    Tensor enc_w3, enc_b3;  // 2c -> 4c after pool
    Tensor enc_w4, enc_b4;  // 4c -> D after pool

    Tensor dec_w1, dec_b1;  // D -> 4c
    Tensor dec_w2, dec_b2;  // 4c -> 2c
    Tensor dec_w3, dec_b3;  // 2c -> c
    Tensor dec_w4, dec_b4;  // c -> 3

    static CodecParams init(int base_channels, int embed_dim, Rng& rng);
    std::vector<Tensor> encoder_tensors() const;
    std::vector<Tensor> decoder_tensors() const;
    std::vector<std::pair<std::string, Tensor>> named_tensors() const;
};

// images: [B,3,H,W] with values in [0,1], H and W divisible by 8. The
// encoder is a fixed feature extractor; no gradient reaches its weights.
FeatureTaps encode(const Tensor& images, const CodecParams& params);

// Reinterprets the stride-8 tap [B,D,H,W] as a token grid [B,H,W,D].
TokenGrid tokenize(const FeatureTaps& taps);

// Inverse layout transform of tokenize.
Tensor grid_to_tap(const TokenGrid& grid);

// Three x2 nearest-neighbor upsample + conv stages, then a final conv to 3
// channels. Raw values are returned; clamping happens at serialization.
Tensor decode(const TokenGrid& tokens, const CodecParams& params);

// Binary PPM (P6, 8-bit). Serialization clamps to [0,1] and rounds half-up.
Tensor read_ppm(const std::string& path);                    // -> [1,3,H,W] in [0,1]
void write_ppm(const Tensor& image, const std::string& path);  // [3,H,W] or [1,3,H,W]

}  // namespace unist
