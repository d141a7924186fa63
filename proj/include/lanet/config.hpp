#pragma once

#include "lanet/model_config.hpp"
#include "lanet/synth.hpp"
#include "lanet/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lanet {

/// Every tunable of a run. Resolution order: built-in defaults, then a
/// config file, then `key=value` overrides.
struct RunConfig {
    std::uint64_t seed = 0;
    ModelConfig model;
    TrainConfig train;
    GeneratorSpec synth;  // its problem config always mirrors model.problem
    std::vector<double> theta_sweep{0.5, 0.6, 0.7, 0.8};

    void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& c);
/// Reads a (possibly partial) document over `base`. Unknown keys and type
/// mismatches throw std::invalid_argument naming the key.
RunConfig from_json(const nlohmann::ordered_json& doc, RunConfig base = {});

/// Applies "a.b.c=value" to a document. The value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(nlohmann::ordered_json& doc, const std::string& assignment);

RunConfig resolve_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

/// Keys whose values differ between two model configs, dotted.
std::vector<std::string> model_config_diff(const ModelConfig& a, const ModelConfig& b);

}  // namespace lanet
