#include "cost.hpp"

namespace unist {

namespace {
thread_local CostMeter* g_meter = nullptr;
}

void CostMeter::add(const std::string& item, int64_t flops) {
    std::string label;
    for (const auto& s : scope_) {
        label += s;
        label += '/';
    }
    label += item;
    items_[label] += flops;
}

void CostMeter::push_scope(const std::string& name) { scope_.push_back(name); }
void CostMeter::pop_scope() { scope_.pop_back(); }

int64_t CostMeter::total() const {
    int64_t t = 0;
    for (const auto& [label, flops] : items_) t += flops;
    return t;
}

int64_t CostMeter::total_matching(const std::string& suffix) const {
    int64_t t = 0;
    for (const auto& [label, flops] : items_) {
        if (label.size() >= suffix.size() &&
            label.compare(label.size() - suffix.size(), suffix.size(), suffix) == 0) {
            t += flops;
        }
    }
    return t;
}

void CostMeter::clear() {
    items_.clear();
    scope_.clear();
}

void set_active_meter(CostMeter* meter) { g_meter = meter; }
CostMeter* active_meter() { return g_meter; }

void meter_add(const char* item, int64_t flops) {
    if (g_meter) g_meter->add(item, flops);
}

MeterScope::MeterScope(const std::string& name) : active_(g_meter != nullptr) {
    if (active_) g_meter->push_scope(name);
}

MeterScope::~MeterScope() {
    if (active_) g_meter->pop_scope();
}

}  // namespace unist
