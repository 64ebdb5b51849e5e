#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace unist {

namespace {

double eval_value(const std::function<Tensor()>& f) {
    NoGradGuard ng;
    return f().scalar_value();
}

}  // namespace

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  const GradCheckOptions& opts) {
    const double v1 = eval_value(f);
    const double v2 = eval_value(f);
    if (std::memcmp(&v1, &v2, sizeof(double)) != 0) {
        throw DeterminismError("grad_check: two evaluations at the same point differ (" +
                               std::to_string(v1) + " vs " + std::to_string(v2) + ")");
    }

    for (const Tensor& p : params) {
        if (!p.requires_grad()) {
            throw ConfigError("grad_check: parameter without requires_grad");
        }
        const_cast<Tensor&>(p).zero_grad();
    }
    {
        Tensor loss = f();
        backward(loss);
    }

    Rng rng(opts.sample_seed);
    double max_rel = 0.0;
    for (const Tensor& p : params) {
        Tensor& param = const_cast<Tensor&>(p);
        const int64_t n = param.numel();
        std::vector<int64_t> coords;
        if (n <= opts.coords_per_tensor) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            std::unordered_set<int64_t> seen;
            while (static_cast<int>(seen.size()) < opts.coords_per_tensor) {
                seen.insert(static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(n)));
            }
            coords.assign(seen.begin(), seen.end());
            std::sort(coords.begin(), coords.end());
        }
        for (int64_t c : coords) {
            const size_t u = static_cast<size_t>(c);
            const double orig = param.data()[u];
            param.mutable_data()[u] = orig + opts.eps;
            const double fp = eval_value(f);
            param.mutable_data()[u] = orig - opts.eps;
            const double fm = eval_value(f);
            param.mutable_data()[u] = orig;
            const double numeric = (fp - fm) / (2.0 * opts.eps);
            const double analytic = param.has_grad() ? param.grad()[u] : 0.0;
            const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
            max_rel = std::max(max_rel, std::fabs(numeric - analytic) / denom);
        }
    }
    return max_rel;
}

}  // namespace unist
