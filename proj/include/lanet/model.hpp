#pragma once

#include "lanet/agent_encoder.hpp"
#include "lanet/caip.hpp"
#include "lanet/decoder.hpp"
#include "lanet/forecast.hpp"
#include "lanet/map_encoder.hpp"
#include "lanet/model_config.hpp"
#include "lanet/objective.hpp"

#include <optional>
#include <vector>

namespace lanet {

/// Scene plus every parameter-independent structure derived from it.
struct PreparedScene {
    Scene scene;
    MapGraph map;
    AgentGraph agents;
    DecoderGraph decoder;
    TargetTruth truth;
    std::vector<FutureTruth> futures;  // scene frame, one per target
};

PreparedScene prepare_scene(Scene scene, const ModelConfig& cfg);

struct ForwardOptions {
    std::optional<double> theta_override;
    std::optional<int> refine_steps;
};

struct ModelOutput {
    nn::Var x_map;
    nn::Var x_agent;
    PrunedEdges pruned;
    ForecastVars proposal;
    ForecastVars refined;
};

class LanetModel {
public:
    LanetModel(const ModelConfig& cfg, std::uint64_t seed);

    ModelOutput forward(nn::Tape& tape, const PreparedScene& scene, const ForwardOptions& opts = {});

    /// Inference without gradient recording; forecasts in the scene frame.
    std::vector<Forecast> predict(const PreparedScene& scene, const ForwardOptions& opts = {});

    const ModelConfig& config() const { return config_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const Caip& caip() const { return caip_; }
    const MapEncoder& map_encoder() const { return map_; }
    const AgentEncoder& agent_encoder() const { return agent_; }
    const Decoder& decoder() const { return decoder_; }

private:
    ModelConfig config_;
    nn::ParamStore params_;
    MapEncoder map_;
    AgentEncoder agent_;
    Caip caip_;
    Decoder decoder_;
};

/// Converts decoder outputs (target frames) to scene-frame forecasts.
std::vector<Forecast> to_forecasts(const ForecastVars& f, const PreparedScene& scene);

}  // namespace lanet
