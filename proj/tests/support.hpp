#pragma once

#include "lanet/geometry.hpp"
#include "lanet/model.hpp"
#include "lanet/scene.hpp"
#include "lanet/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace lanet::test {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(LANET_DATA_DIR) / name; }

inline Scene tiny_scene() { return load_scene(data_path("tiny_straight.scene.json")); }

/// Small architecture for fast property and gradient tests.
inline ModelConfig toy_config(int width = 8) {
    ModelConfig c;
    c.width = width;
    c.heads = 2;
    c.map_rounds = 1;
    c.encoder_rounds = 1;
    c.refine_steps = 1;
    c.caip_hidden = width;
    return c;
}

inline GeneratorSpec small_spec() {
    GeneratorSpec s;
    s.num_lanes = 2;
    s.segments_per_lane = 1;
    s.num_agents = 3;
    s.num_targets = 2;
    return s;
}

inline RigidTransform random_transform(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(-kPi, kPi), off(-200.0, 200.0);
    return {ang(rng), off(rng), off(rng)};
}

inline Pose2 random_pose(std::mt19937_64& rng, double extent = 20.0) {
    std::uniform_real_distribution<double> pos(-extent, extent), ang(-kPi, kPi);
    return Pose2(pos(rng), pos(rng), ang(rng));
}

inline double max_abs_diff(const nn::Matrix& a, const nn::Matrix& b) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

/// Sets every parameter whose name starts with `prefix` to zero.
inline void zero_params(nn::ParamStore& ps, const std::string& prefix) {
    for (auto& [name, p] : ps)
        if (name.rfind(prefix, 0) == 0) p.value.setZero();
}

}  // namespace lanet::test
