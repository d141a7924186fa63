#pragma once

#include "lanet/nn/layers.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lanet::nn {

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
    /// vanishing gradients from turning round-off into huge ratios.
    double floor = 1e-6;
    /// Only parameters whose name starts with one of these prefixes (all when empty).
    std::vector<std::string> prefixes;
    /// Check at most this many entries per parameter, spread evenly (0 = all).
    int max_entries_per_param = 0;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    double max_abs_grad = 0.0;
    int checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> params;
    double max_rel_error = 0.0;
    int checked = 0;
    std::vector<std::string> failures;

    bool passed() const { return failures.empty(); }
};

using ScalarFn = std::function<Var(Graph&)>;

/// Compares reverse-mode gradients of `fn` against central finite differences
/// for every (selected) parameter entry. `fn` must be deterministic.
GradCheckReport grad_check(const ScalarFn& fn, ParamStore& params, const GradCheckOptions& opts = {});

}  // namespace lanet::nn
