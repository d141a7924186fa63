#pragma once

#include "lanet/config.hpp"
#include "lanet/model.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace lanet {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    RunConfig config;
    std::map<std::string, nn::Matrix> params;
};

void save_checkpoint(const std::filesystem::path& path, const LanetModel& model, const RunConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint tensors into `model`. Throws std::invalid_argument naming
/// the divergent config keys or the mismatched tensors.
void restore(LanetModel& model, const Checkpoint& ckpt);

}  // namespace lanet
