#pragma once

#include "lanet/scene.hpp"

namespace lanet {

/// Architecture and geometry hyperparameters shared by every model component.
struct ModelConfig {
    ProblemConfig problem;
    int width = 32;
    int heads = 2;
    int map_rounds = 2;
    int encoder_rounds = 2;
    int refine_steps = 2;
    int knn_k = 8;
    int temporal_window = 0;  // 0 = full history
    double agent_map_radius = 50.0;
    double agent_agent_radius = 50.0;
    int caip_hidden = 32;
    double theta_init = 0.5;
    double tau_init = 0.1;
    double caip_score_bias = 2.0;  // initial scorer output bias, sigmoid(2) ~ 0.88
    bool learn_tau = true;
    bool eq8_as_printed = false;
    bool caip_in_encoder = false;
    double scale_floor = 1e-3;

    int window() const { return temporal_window > 0 ? temporal_window : problem.history_steps; }
    /// Throws std::invalid_argument naming the offending key.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

}  // namespace lanet
