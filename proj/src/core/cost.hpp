#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace unist {

// FLOP conventions, shared by the runtime meter and the analytic cost model.
// One multiply-add pair counts as 2 FLOPs. Softmax is counted at 5
// FLOPs/element (max, subtract, exp, sum, divide); layer norm at 8
// FLOPs/element (mean 1, variance 3, normalize 2, affine 2). Element counts
// are exact integers, never sampled.
inline int64_t flops_matmul(int64_t batch, int64_t m, int64_t k, int64_t n) {
    return 2 * batch * m * k * n;
}
inline int64_t flops_conv2d(int64_t out_elems, int64_t c_in, int64_t kh, int64_t kw,
                            bool has_bias) {
    return out_elems * (2 * c_in * kh * kw + (has_bias ? 1 : 0));
}
inline int64_t flops_softmax(int64_t elems) { return 5 * elems; }
inline int64_t flops_layer_norm(int64_t elems) { return 8 * elems; }
inline int64_t flops_eltwise(int64_t elems, int64_t per_elem = 1) { return per_elem * elems; }

// Runtime FLOP meter. When installed, every numcore primitive reports its
// analytic cost for the dims it actually ran at, recorded under the current
// scope label ("amsa/stage1/scores", ...). Counts are exact integers so the
// bench suite can assert equality against closed-form predictions.
class CostMeter {
  public:
    void add(const std::string& item, int64_t flops);
    void push_scope(const std::string& name);
    void pop_scope();

    int64_t total() const;
    // Sum of items whose label ends with the given suffix.
    int64_t total_matching(const std::string& suffix) const;
    const std::map<std::string, int64_t>& items() const { return items_; }
    void clear();

  private:
    std::map<std::string, int64_t> items_;
    std::vector<std::string> scope_;
};

// Installs/uninstalls the active meter for this thread. Ops ignore cost
// reporting when no meter is installed.
void set_active_meter(CostMeter* meter);
CostMeter* active_meter();

// Reports under the active meter, if any.
void meter_add(const char* item, int64_t flops);

struct MeterScope {
    explicit MeterScope(const std::string& name);
    ~MeterScope();
    MeterScope(const MeterScope&) = delete;
    MeterScope& operator=(const MeterScope&) = delete;

  private:
    bool active_;
};

}  // namespace unist
