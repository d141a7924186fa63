#include "lanet/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace lanet {

using nlohmann::ordered_json;

void save_checkpoint(const std::filesystem::path& path, const LanetModel& model, const RunConfig& config) {
    ordered_json doc;
    doc["format"] = "lanet-checkpoint";
    doc["version"] = kCheckpointVersion;
    doc["config"] = to_json(config);
    ordered_json params = ordered_json::object();
    for (const auto& [name, p] : model.params()) {
        const nn::Matrix& v = p.value;
        params[name] = {{"rows", v.rows()},
                        {"cols", v.cols()},
                        {"data", std::vector<double>(v.data(), v.data() + v.size())}};
    }
    doc["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
    out << doc.dump() << '\n';
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    ordered_json doc = ordered_json::parse(in, nullptr, false);
    const std::string where = "checkpoint " + path.string();
    if (doc.is_discarded() || !doc.is_object()) throw std::runtime_error(where + ": not valid JSON");
    if (doc.value("format", "") != "lanet-checkpoint") throw std::runtime_error(where + ": not a lanet checkpoint");
    if (doc.value("version", -1) != kCheckpointVersion)
        throw std::runtime_error(where + ": unsupported version " + doc.value("version", ordered_json()).dump());
    Checkpoint ck;
    ck.config = from_json(doc.at("config"));
    for (const auto& [name, t] : doc.at("params").items()) {
        const int rows = t.at("rows").get<int>(), cols = t.at("cols").get<int>();
        const auto data = t.at("data").get<std::vector<double>>();
        if (static_cast<std::size_t>(rows) * cols != data.size())
            throw std::runtime_error(where + ": tensor " + name + " has inconsistent size");
        ck.params[name] = Eigen::Map<const nn::Matrix>(data.data(), rows, cols);
    }
    return ck;
}

void restore(LanetModel& model, const Checkpoint& ckpt) {
    const auto diff = model_config_diff(ckpt.config.model, model.config());
    if (!diff.empty()) {
        std::string keys;
        for (const auto& k : diff) keys += (keys.empty() ? "" : ", ") + k;
        throw std::invalid_argument("checkpoint config differs from the requested model config in: " + keys);
    }
    for (auto& [name, p] : model.params()) {
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end()) throw std::invalid_argument("checkpoint: missing tensor " + name);
        if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
            throw std::invalid_argument("checkpoint: tensor " + name + " has the wrong shape");
        p.value = it->second;
    }
    if (ckpt.params.size() != model.params().size())
        throw std::invalid_argument("checkpoint: holds tensors the model does not define");
}

}  // namespace lanet
