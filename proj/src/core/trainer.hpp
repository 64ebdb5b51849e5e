#pragma once

#include <string>
#include <vector>

#include "model.hpp"

namespace unist {

struct TrainConfig {
    int steps = 200;
    double lr = 1e-3;
    double momentum = 0.9;
    uint64_t seed = 1;
    LossWeights weights;
    DitConfig dit;
    int codec_base_channels = 4;
    int n_video = 2;  // video:image ratio stays 1:1
    int n_image = 2;
    int image_size = 64;

    void validate() const;
    // test-scale model dims (D=16, 2 heads) with the default block counts
    static TrainConfig toy_defaults();
};

struct TrainBatch {
    Tensor content;  // [n_video + n_image, 3, S, S]; video frames first
    Tensor style;    // [1, 3, S, S]
    int n_video = 0;
};

struct LossBreakdown {
    double content = 0.0;
    double style = 0.0;
    double identity = 0.0;
    double temporal = 0.0;
    double total = 0.0;
};

struct TrainState {
    Model model;
    std::vector<Tensor> params;
    std::vector<std::vector<double>> velocity;

    static TrainState init(const TrainConfig& cfg);
};

// Forward (stylized pass + both identity passes), total loss, backward,
// momentum-SGD update on decoder and DIT parameters. The codec encoder
// stays frozen. Raises NumericError naming the first non-finite tensor.
LossBreakdown train_step(TrainState& state, const TrainBatch& batch, const TrainConfig& cfg);

// Procedurally generated frames/images/style for the given seed.
TrainBatch make_toy_batch(const TrainConfig& cfg);

struct OverfitReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<LossBreakdown> curve;
};

// Runs cfg.steps training steps on the fixed toy dataset. Aborts with
// NumericError if the loss diverges past 10x its initial value. Optional
// paths receive the loss curve CSV and the final checkpoint.
OverfitReport overfit_check(const TrainConfig& cfg, const std::string& curve_csv_path = "",
                            const std::string& checkpoint_path = "");

void write_loss_curve_csv(const std::vector<LossBreakdown>& curve, const std::string& path);

}  // namespace unist
