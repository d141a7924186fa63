#pragma once

#include "lanet/decoder.hpp"
#include "lanet/nn/ops.hpp"

#include <span>
#include <vector>

namespace lanet {

/// Future of every target in its own reference frame. Matrices are targets x T;
/// `valid` holds 0/1.
struct TargetTruth {
    nn::Matrix x, y, heading, valid;

    int num_targets() const { return static_cast<int>(x.rows()); }
};

TargetTruth make_target_truth(const Scene& scene, const DecoderGraph& graph);

/// Negative log-likelihood of a per-axis Laplace mixture, averaged over targets.
///
/// `locs[d]` and `scales[d]` are (targets * K) x T, target-major; `truth[d]`
/// and `valid` are targets x T; `log_alpha` is targets x K. The product over
/// valid steps and the mixture sum are evaluated in log space. With
/// `stop_grad_components` only `log_alpha` receives gradient.
/// Throws std::invalid_argument for a target without any valid step.
nn::Var laplace_mixture_nll(std::span<const nn::Var> locs, std::span<const nn::Var> scales, const nn::Var& log_alpha,
                            std::span<const nn::Matrix> truth, const nn::Matrix& valid, bool stop_grad_components);

nn::Var laplace_mixture_nll(const ForecastVars& f, const TargetTruth& truth, bool stop_grad_components);

/// Mode with the smallest displacement at the last valid step; ties go to the lower index.
std::vector<int> wta_winners(const ForecastVars& f, const TargetTruth& truth);

struct WtaLoss {
    nn::Var loss;
    std::vector<int> winners;
};

/// Laplace NLL of the winning mode over valid steps (both axes plus the
/// wrapped heading error), averaged over targets.
WtaLoss wta_regression_loss(const ForecastVars& f, const TargetTruth& truth);

struct LossBreakdown {
    nn::Var propose, refine, cls, total;
    std::vector<int> winners;  // refined-stage winner per target
    double lambda = 1.0;
};

LossBreakdown total_loss(const ForecastVars& proposal, const ForecastVars& refined, const TargetTruth& truth,
                         double lambda);

}  // namespace lanet
