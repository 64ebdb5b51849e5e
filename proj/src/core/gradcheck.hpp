#pragma once

#include <functional>
#include <vector>

#include "tensor.hpp"

namespace unist {

struct GradCheckOptions {
    double eps = 1e-6;
    // Coordinates probed per tensor (all of them when the tensor is smaller).
    int coords_per_tensor = 32;
    uint64_t sample_seed = 0x6772616463686b; // fixed so reruns probe the same coords
};

// Compares tape gradients of the scalar-valued f against central finite
// differences over a sampled subset of parameter coordinates. Returns the
// max relative error with denominator max(|analytic|, |numeric|, 1e-8).
// f must be deterministic; two evaluations at the same point are compared
// bitwise and a mismatch raises DeterminismError.
double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  const GradCheckOptions& opts = {});

}  // namespace unist
