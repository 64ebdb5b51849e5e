#include "codec.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <tuple>

#include "cost.hpp"
#include "ops.hpp"

namespace unist {

CodecParams CodecParams::init(int base_channels, int embed_dim, Rng& rng) {
    if (base_channels < 1 || embed_dim < 1) throw ConfigError("codec: bad channel plan");
    const int c = base_channels;
    CodecParams p;
    p.base_channels = c;
    p.embed_dim = embed_dim;
    auto conv_init = [&rng](int out_c, int in_c, bool learnable) {
        const int fan_in = in_c * 9;
        return std::make_pair(Tensor::init_uniform({out_c, in_c, 3, 3}, fan_in, rng, learnable),
                              Tensor::init_uniform({out_c}, fan_in, rng, learnable));
    };
    // fixed extractor: requires_grad stays false
    std::tie(p.enc_w1, p.enc_b1) = conv_init(c, 3, false);
    std::tie(p.enc_w2, p.enc_b2) = conv_init(2 * c, c, false);
    std::tie(p.enc_w3, p.enc_b3) = conv_init(4 * c, 2 * c, false);
    std::tie(p.enc_w4, p.enc_b4) = conv_init(embed_dim, 4 * c, false);
    std::tie(p.dec_w1, p.dec_b1) = conv_init(4 * c, embed_dim, true);
    std::tie(p.dec_w2, p.dec_b2) = conv_init(2 * c, 4 * c, true);
    std::tie(p.dec_w3, p.dec_b3) = conv_init(c, 2 * c, true);
    std::tie(p.dec_w4, p.dec_b4) = conv_init(3, c, true);
    return p;
}

std::vector<Tensor> CodecParams::encoder_tensors() const {
    return {enc_w1, enc_b1, enc_w2, enc_b2, enc_w3, enc_b3, enc_w4, enc_b4};
}

std::vector<Tensor> CodecParams::decoder_tensors() const {
    return {dec_w1, dec_b1, dec_w2, dec_b2, dec_w3, dec_b3, dec_w4, dec_b4};
}

std::vector<std::pair<std::string, Tensor>> CodecParams::named_tensors() const {
    return {
        {"codec.enc1.w", enc_w1}, {"codec.enc1.b", enc_b1}, {"codec.enc2.w", enc_w2},
        {"codec.enc2.b", enc_b2}, {"codec.enc3.w", enc_w3}, {"codec.enc3.b", enc_b3},
        {"codec.enc4.w", enc_w4}, {"codec.enc4.b", enc_b4}, {"codec.dec1.w", dec_w1},
        {"codec.dec1.b", dec_b1}, {"codec.dec2.w", dec_w2}, {"codec.dec2.b", dec_b2},
        {"codec.dec3.w", dec_w3}, {"codec.dec3.b", dec_b3}, {"codec.dec4.w", dec_w4},
        {"codec.dec4.b", dec_b4},
    };
}

FeatureTaps encode(const Tensor& images, const CodecParams& params) {
    if (images.rank() != 4 || images.dim(1) != 3) {
        throw ShapeError("encode: expected [B,3,H,W], got " + shape_str(images.shape()));
    }
    if (images.dim(2) % 8 != 0 || images.dim(3) % 8 != 0) {
        throw ShapeError("encode: spatial dims must divide 8, got " + shape_str(images.shape()));
    }
    MeterScope ms("encode");
    FeatureTaps taps;
    taps.phi1 = relu(conv2d(images, params.enc_w1, params.enc_b1, 1, 1));
    taps.phi2 = relu(conv2d(avg_pool2(taps.phi1), params.enc_w2, params.enc_b2, 1, 1));
    taps.phi3 = relu(conv2d(avg_pool2(taps.phi2), params.enc_w3, params.enc_b3, 1, 1));
    taps.phi4 = relu(conv2d(avg_pool2(taps.phi3), params.enc_w4, params.enc_b4, 1, 1));
    return taps;
}

TokenGrid tokenize(const FeatureTaps& taps) {
    if (!taps.phi4.defined()) throw ConfigError("tokenize: stride-8 tap missing");
    return {permute(taps.phi4, {0, 2, 3, 1}), GridKind::Content};
}

Tensor grid_to_tap(const TokenGrid& grid) { return permute(grid.data, {0, 3, 1, 2}); }

Tensor decode(const TokenGrid& tokens, const CodecParams& params) {
    if (tokens.embed_dim() != params.embed_dim) {
        throw ShapeError("decode: token dim " + std::to_string(tokens.embed_dim()) +
                         " does not match codec D=" + std::to_string(params.embed_dim));
    }
    MeterScope ms("decode");
    Tensor x = grid_to_tap(tokens);
    x = relu(conv2d(upsample_nearest2(x), params.dec_w1, params.dec_b1, 1, 1));
    x = relu(conv2d(upsample_nearest2(x), params.dec_w2, params.dec_b2, 1, 1));
    x = relu(conv2d(upsample_nearest2(x), params.dec_w3, params.dec_b3, 1, 1));
    return conv2d(x, params.dec_w4, params.dec_b4, 1, 1);
}

namespace {

int read_ppm_token(std::ifstream& is, const std::string& path) {
    // skips whitespace and '#' comments
    while (true) {
        const int c = is.peek();
        if (c == EOF) throw IoError("ppm truncated header: " + path);
        if (c == '#') {
            std::string line;
            std::getline(is, line);
            continue;
        }
        if (std::isspace(c)) {
            is.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(is >> value)) throw IoError("ppm malformed header: " + path);
    return value;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || m1 != '6') throw IoError("not a binary PPM (P6): " + path);
    const int w = read_ppm_token(is, path);
    const int h = read_ppm_token(is, path);
    const int maxval = read_ppm_token(is, path);
    if (w < 1 || h < 1) throw IoError("ppm has empty dims: " + path);
    if (maxval != 255) throw IoError("only 8-bit PPM supported (maxval 255): " + path);
    is.get();  // single whitespace before payload
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw IoError("ppm payload truncated: " + path);
    }
    std::vector<double> data(raw.size());
    // PPM interleaves RGB per pixel; store planar [1,3,H,W]
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                data[(static_cast<size_t>(ch) * h + y) * w + x] =
                    static_cast<double>(raw[(static_cast<size_t>(y) * w + x) * 3 + ch]) / 255.0;
            }
        }
    }
    return Tensor::from_data({1, 3, h, w}, std::move(data));
}

void write_ppm(const Tensor& image, const std::string& path) {
    Tensor img = image;
    if (img.rank() == 4) {
        if (img.dim(0) != 1) throw ShapeError("write_ppm: batch must be 1");
        img = reshape(img, {img.dim(1), img.dim(2), img.dim(3)});
    }
    if (img.rank() != 3 || img.dim(0) != 3) {
        throw ShapeError("write_ppm: expected [3,H,W], got " + shape_str(image.shape()));
    }
    const int h = img.dim(1), w = img.dim(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open image for writing: " + path);
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                double v = img.at((static_cast<int64_t>(ch) * h + y) * w + x);
                v = std::min(std::max(v, 0.0), 1.0);
                raw[(static_cast<size_t>(y) * w + x) * 3 + ch] =
                    static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
            }
        }
    }
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw IoError("image write failed: " + path);
}

}  // namespace unist
