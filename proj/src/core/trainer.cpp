#include "trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ops.hpp"

namespace unist {

void TrainConfig::validate() const {
    if (steps < 1) throw ConfigError("train config: steps must be >= 1");
    // lr 0 is allowed so the no-update contract stays testable
    if (lr < 0.0) throw ConfigError("train config: lr must be >= 0");
    if (n_video < 1 || n_image < 1 || n_video != n_image) {
        throw ConfigError("train config: video:image ratio is fixed at 1:1");
    }
    if (image_size % 8 != 0) throw ConfigError("train config: image size must divide 8");
    weights.validate();
    dit.validate();
}

TrainConfig TrainConfig::toy_defaults() {
    TrainConfig cfg;
    cfg.dit.embed_dim = 16;
    cfg.dit.heads = 2;
    return cfg;
}

TrainState TrainState::init(const TrainConfig& cfg) {
    cfg.validate();
    TrainState st{Model::init({cfg.dit, cfg.codec_base_channels}, cfg.seed), {}, {}};
    st.params = st.model.trainable_tensors();
    st.velocity.resize(st.params.size());
    for (size_t i = 0; i < st.params.size(); ++i) {
        st.velocity[i].assign(static_cast<size_t>(st.params[i].numel()), 0.0);
    }
    return st;
}

namespace {

FeatureTaps taps_slice(const FeatureTaps& taps, int start, int len) {
    return {narrow(taps.phi1, 0, start, len), narrow(taps.phi2, 0, start, len),
            narrow(taps.phi3, 0, start, len), narrow(taps.phi4, 0, start, len)};
}

}  // namespace

LossBreakdown train_step(TrainState& state, const TrainBatch& batch, const TrainConfig& cfg) {
    const Model& m = state.model;
    const int t = batch.content.dim(0);
    if (batch.n_video < 1 || batch.n_video >= t) {
        throw ConfigError("train_step: batch must hold video frames followed by image frames");
    }

    for (Tensor& p : state.params) p.zero_grad();

    // stylized pass
    const FeatureTaps taps_c = encode(batch.content, m.codec);
    const FeatureTaps taps_s = encode(batch.style, m.codec);
    TokenGrid seq_c = tokenize(taps_c);
    TokenGrid grid_s = tokenize(taps_s);
    grid_s.kind = GridKind::Style;
    const TokenGrid stylized = dit_forward(seq_c, grid_s, cfg.dit, m.dit);
    const Tensor imgs_cs = decode(stylized, m.codec);
    const FeatureTaps taps_cs = encode(imgs_cs, m.codec);

    const Tensor l_content = content_loss(taps_cs, taps_c);
    const Tensor l_style = style_loss(taps_cs, taps_s);

    // identity pass 1: the content sequence serves as its own style
    TokenGrid content_as_style{seq_c.data, GridKind::Style};
    const Tensor imgs_cc = decode(dit_forward(seq_c, content_as_style, cfg.dit, m.dit), m.codec);
    const FeatureTaps taps_cc = encode(imgs_cc, m.codec);

    // identity pass 2: the style image runs as a one-frame content sequence,
    // which forces the self-attention interaction path
    DitConfig cfg_ss = cfg.dit;
    cfg_ss.unimodal = true;
    TokenGrid style_as_content{grid_s.data, GridKind::Content};
    const Tensor imgs_ss = decode(dit_forward(style_as_content, grid_s, cfg_ss, m.dit), m.codec);
    const FeatureTaps taps_ss = encode(imgs_ss, m.codec);

    const Tensor l_identity = identity_loss(imgs_cc, batch.content, imgs_ss, batch.style,
                                            taps_cc, taps_c, taps_ss, taps_s, cfg.weights);

    // temporal loss over consecutive video frames only
    Tensor l_temporal = Tensor::scalar(0.0);
    for (int i = 0; i + 1 < batch.n_video; ++i) {
        l_temporal = add(l_temporal,
                         temporal_loss(taps_slice(taps_c, i, 1), taps_slice(taps_c, i + 1, 1),
                                       taps_slice(taps_cs, i, 1), taps_slice(taps_cs, i + 1, 1)));
    }

    const Tensor total = total_loss(l_content, l_style, l_identity, l_temporal, cfg.weights);

    LossBreakdown out;
    out.content = l_content.scalar_value();
    out.style = l_style.scalar_value();
    out.identity = l_identity.scalar_value();
    out.temporal = l_temporal.scalar_value();
    out.total = total.scalar_value();
    if (!std::isfinite(out.total)) {
        throw NumericError("train_step: non-finite total loss");
    }

    backward(total);
    for (size_t i = 0; i < state.params.size(); ++i) {
        Tensor& p = state.params[i];
        std::vector<double>& vel = state.velocity[i];
        const std::vector<double>& g = p.grad();
        std::vector<double>& data = p.mutable_data();
        for (size_t j = 0; j < data.size(); ++j) {
            vel[j] = cfg.momentum * vel[j] + g[j];
            data[j] -= cfg.lr * vel[j];
        }
    }
    return out;
}

namespace {

// deterministic toy frames: smooth gradients + checker + seeded noise;
// frame 2 is frame 1 shifted one pixel (a consecutive-frame pair)
void fill_video_frame(std::vector<double>& data, int s, int shift, Rng& rng) {
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const int xs = (x + shift) % s;
                const double grad = 0.35 * static_cast<double>(xs) / s +
                                    0.25 * static_cast<double>(y) / s;
                const double checker = ((xs / 8 + y / 8) % 2 == 0) ? 0.25 : 0.0;
                const double wave = 0.1 * std::sin(2.0 * 3.14159265358979 *
                                                   (xs + 2.0 * c) / 16.0);
                data[(static_cast<size_t>(c) * s + y) * s + x] =
                    0.15 + grad + checker + wave + 0.02 * rng.next_double();
            }
        }
    }
}

void fill_checker_image(std::vector<double>& data, int s, int cell, Rng& rng) {
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const double checker = ((x / cell + y / cell) % 2 == 0) ? 0.7 : 0.2;
                const double tint = 0.1 * c;
                data[(static_cast<size_t>(c) * s + y) * s + x] =
                    checker - tint + 0.05 * rng.next_double();
            }
        }
    }
}

void fill_radial_image(std::vector<double>& data, int s, Rng& rng) {
    const double cx = s / 2.0, cy = s / 2.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const double r = std::hypot(x - cx, y - cy) / (0.7 * s);
                data[(static_cast<size_t>(c) * s + y) * s + x] =
                    std::max(0.0, 0.9 - r + 0.05 * c) * 0.9 + 0.05 * rng.next_double();
            }
        }
    }
}

void fill_style_image(std::vector<double>& data, int s, Rng& rng) {
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const double stripes = ((x + y) / 6 % 2 == 0) ? 0.85 : 0.1;
                const double ramp = 0.3 * static_cast<double>(x) / s * (c == 0 ? 1.0 : -0.5);
                data[(static_cast<size_t>(c) * s + y) * s + x] =
                    std::min(1.0, std::max(0.0, stripes + ramp)) * 0.95 +
                    0.03 * rng.next_double();
            }
        }
    }
}

}  // namespace

TrainBatch make_toy_batch(const TrainConfig& cfg) {
    cfg.validate();
    const int s = cfg.image_size;
    const int64_t plane = static_cast<int64_t>(3) * s * s;
    Rng rng(cfg.seed ^ 0x746f7964617461ull);
    const int t = cfg.n_video + cfg.n_image;
    std::vector<double> content(static_cast<size_t>(t) * plane);
    std::vector<double> frame(static_cast<size_t>(plane));
    for (int i = 0; i < cfg.n_video; ++i) {
        Rng frame_rng(cfg.seed ^ 0x766964ull);  // same noise, shifted content
        fill_video_frame(frame, s, i, frame_rng);
        std::copy(frame.begin(), frame.end(), content.begin() + static_cast<int64_t>(i) * plane);
    }
    for (int i = 0; i < cfg.n_image; ++i) {
        if (i % 2 == 0) {
            fill_checker_image(frame, s, 16, rng);
        } else {
            fill_radial_image(frame, s, rng);
        }
        std::copy(frame.begin(), frame.end(),
                  content.begin() + static_cast<int64_t>(cfg.n_video + i) * plane);
    }
    std::vector<double> style(static_cast<size_t>(plane));
    fill_style_image(style, s, rng);
    TrainBatch batch;
    batch.content = Tensor::from_data({t, 3, s, s}, std::move(content));
    batch.style = Tensor::from_data({1, 3, s, s}, std::move(style));
    batch.n_video = cfg.n_video;
    return batch;
}

OverfitReport overfit_check(const TrainConfig& cfg, const std::string& curve_csv_path,
                            const std::string& checkpoint_path) {
    cfg.validate();
    TrainState state = TrainState::init(cfg);
    const TrainBatch batch = make_toy_batch(cfg);
    OverfitReport report;
    for (int step = 0; step < cfg.steps; ++step) {
        const LossBreakdown b = train_step(state, batch, cfg);
        if (step == 0) report.initial_loss = b.total;
        if (b.total > 10.0 * report.initial_loss) {
            throw NumericError("overfit_check: loss diverged at step " + std::to_string(step) +
                               " (" + std::to_string(b.total) + " vs initial " +
                               std::to_string(report.initial_loss) + ")");
        }
        report.curve.push_back(b);
    }
    report.final_loss = report.curve.back().total;
    if (!curve_csv_path.empty()) write_loss_curve_csv(report.curve, curve_csv_path);
    if (!checkpoint_path.empty()) state.model.save(checkpoint_path);
    return report;
}

void write_loss_curve_csv(const std::vector<LossBreakdown>& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open loss curve for writing: " + path);
    os << "step,content,style,identity,temporal,total\n";
    char buf[256];
    for (size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                      curve[i].content, curve[i].style, curve[i].identity, curve[i].temporal,
                      curve[i].total);
        os << buf;
    }
}

}  // namespace unist
