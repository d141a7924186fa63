#pragma once

#include "lanet/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lanet {

struct TrainConfig {
    double lambda = 1.0;
    double learning_rate = 3e-3;
    int steps = 2000;
    int batch_size = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip = 0.0;  // global L2 norm; 0 disables
    int warmup_steps = 0;
    int log_every = 50;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct LossRecord {
    int step = 0;
    double propose = 0.0, refine = 0.0, cls = 0.0, total = 0.0;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int step, const std::string& what) : std::runtime_error(what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

class Adam {
public:
    Adam(const TrainConfig& cfg) : cfg_(cfg) {}
    /// One update from the gradients currently stored in `ps`.
    void step(nn::ParamStore& ps);
    int iterations() const { return t_; }

private:
    TrainConfig cfg_;
    int t_ = 0;
    std::map<std::string, std::pair<nn::Matrix, nn::Matrix>> moments_;
};

/// Loss of one scene with gradients accumulated into the model parameters
/// scaled by `weight`. Returns the breakdown values.
LossRecord accumulate_scene_loss(LanetModel& model, const PreparedScene& scene, double lambda, double weight);

using StepCallback = std::function<void(const LossRecord&)>;

/// Adam over seeded shuffles of `data`. Throws DivergenceError on a non-finite loss.
std::vector<LossRecord> train(LanetModel& model, const std::vector<PreparedScene>& data, const TrainConfig& cfg,
                              std::uint64_t seed, const StepCallback& on_step = {});

std::string format_loss_curve(const std::vector<LossRecord>& curve);

}  // namespace lanet
