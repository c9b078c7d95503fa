#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spectralnet/errors.hpp"
#include "spectralnet/model.hpp"
#include "spectralnet/npy.hpp"
#include "spectralnet/rng.hpp"

namespace spectralnet {

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    return nlohmann::json{{"patch_size", c.patch_size},
                          {"input_bands", c.input_bands},
                          {"class_count", c.class_count},
                          {"stage_channels", c.stage_channels},
                          {"wavelet_levels", c.wavelet_levels},
                          {"dense_width", c.dense_width},
                          {"dropout_rates", c.dropout_rates},
                          {"fusion", fusion_name(c.fusion)},
                          {"fuse_wavelets", c.fuse_wavelets}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.patch_size = j.at("patch_size").get<std::size_t>();
    c.input_bands = j.at("input_bands").get<std::size_t>();
    c.class_count = j.at("class_count").get<int>();
    c.stage_channels = j.at("stage_channels").get<std::vector<std::size_t>>();
    c.wavelet_levels = j.at("wavelet_levels").get<int>();
    c.dense_width = j.at("dense_width").get<std::size_t>();
    c.dropout_rates = j.at("dropout_rates").get<std::array<double, 2>>();
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    c.fuse_wavelets = j.at("fuse_wavelets").get<bool>();
    return c;
}

// Checkpoint metadata beyond the weights themselves: how the model was
// configured, how training was seeded, and how the train/test split was
// drawn (so evaluation can recreate the held-out set).
struct CheckpointMeta {
    ModelConfig config;
    std::uint64_t train_seed = 0;
    int epoch = 0;
    double split_fraction = 0.0;
    std::uint64_t split_seed = 0;
};

namespace detail {

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

}  // namespace detail

// Writes manifest.json plus one NPY per parameter and per batch-norm
// running buffer into `dir`. nlohmann sorts object keys, so equal states
// produce byte-identical manifests.
inline void save_checkpoint(const std::string& dir, Network& net, const CheckpointMeta& meta) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json manifest;
    manifest["format"] = "spectralnet-checkpoint-v1";
    manifest["config"] = model_config_to_json(net.config);
    manifest["resolved_levels"] = net.levels;
    manifest["train_seed"] = meta.train_seed;
    manifest["epoch"] = meta.epoch;
    manifest["split_fraction"] = meta.split_fraction;
    manifest["split_seed"] = meta.split_seed;

    manifest["parameters"] = nlohmann::json::array();
    for (auto& [name, tensor] : net.named_parameters()) {
        npy::save_tensor((fs::path(dir) / (name + ".npy")).string(), tensor);
        manifest["parameters"].push_back(
            nlohmann::json{{"name", name}, {"shape", tensor.shape()}});
    }

    manifest["stats"] = nlohmann::json::array();
    for (auto& [name, rs] : net.named_stats()) {
        npy::save_f64((fs::path(dir) / (name + ".running_mean.npy")).string(),
                      {rs->mean.size()}, rs->mean.data());
        npy::save_f64((fs::path(dir) / (name + ".running_var.npy")).string(), {rs->var.size()},
                      rs->var.data());
        manifest["stats"].push_back(nlohmann::json{
            {"name", name}, {"channels", rs->mean.size()}, {"batches_seen", rs->batches_seen}});
    }
    detail::spit(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

inline Network load_checkpoint(const std::string& dir, CheckpointMeta* meta_out = nullptr) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    if (!fs::exists(root / "manifest.json"))
        throw InputError("no checkpoint manifest at " + (root / "manifest.json").string());

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(detail::slurp(root / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("unparseable checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "spectralnet-checkpoint-v1")
        throw ArtifactMismatchError("unknown checkpoint format '" +
                                    manifest.value("format", "") + "'");

    CheckpointMeta meta;
    ModelConfig config;
    try {
        config = model_config_from_json(manifest.at("config"));
        meta.config = config;
        meta.train_seed = manifest.at("train_seed").get<std::uint64_t>();
        meta.epoch = manifest.at("epoch").get<int>();
        meta.split_fraction = manifest.at("split_fraction").get<double>();
        meta.split_seed = manifest.at("split_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError("checkpoint manifest missing fields: " + std::string(e.what()));
    }

    Rng scratch(0);  // weights are overwritten below
    Network net = build_model(config, scratch);

    for (auto& [name, tensor] : net.named_parameters()) {
        const fs::path file = root / (name + ".npy");
        if (!fs::exists(file))
            throw ArtifactMismatchError("checkpoint is missing parameter file " + file.string());
        Tensor loaded = npy::load_tensor(file.string());
        if (loaded.shape() != tensor.shape())
            throw ArtifactMismatchError("parameter " + name + " has shape " +
                                        detail::shape_str(loaded.shape()) + ", model expects " +
                                        detail::shape_str(tensor.shape()));
        std::copy_n(loaded.data(), loaded.size(), tensor.data());
    }

    for (auto& [name, rs] : net.named_stats()) {
        npy::NpyArray mean = npy::load((root / (name + ".running_mean.npy")).string());
        npy::NpyArray var = npy::load((root / (name + ".running_var.npy")).string());
        if (mean.count() != rs->mean.size() || var.count() != rs->var.size())
            throw ArtifactMismatchError("running stats " + name + " have wrong channel count");
        rs->mean = std::move(mean.values);
        rs->var = std::move(var.values);
        rs->batches_seen = 0;
        for (const auto& entry : manifest.at("stats"))
            if (entry.at("name").get<std::string>() == name)
                rs->batches_seen = entry.at("batches_seen").get<long long>();
    }

    if (meta_out) *meta_out = meta;
    return net;
}

}  // namespace spectralnet
