#pragma once

#include <string>
#include <vector>

#include "tensor.hpp"

namespace unist {

struct VerifyCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    // Most checks pass when value < threshold; witness checks require the
    // value to exceed it.
    bool require_above = false;
    bool pass = false;
};

struct VerifyReport {
    std::string suite;
    std::vector<VerifyCheck> checks;

    bool all_pass() const;
    double worst_value() const;
};

// Suites: "amsa" (oracle equivalence), "grads" (finite-difference battery),
// "flops" (instrumented counter vs closed form, integer equality),
// "losses" (identities and invariances), "determinism" (bitwise repeats).
// "all" runs every suite.
std::vector<std::string> verify_suite_names();
std::vector<VerifyReport> run_verify(const std::string& selector);
std::string format_verify_reports(const std::vector<VerifyReport>& reports);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace unist
