#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ropaws/data.hpp"

// Flat key=value config shared by the trainer and the CLI. Unknown keys are
// rejected; every run writes back the resolved values it actually used.

namespace ropaws::config {

enum class Method { Paws, Ropaws };

struct TrainConfig {
    double tau = 0.1;
    double sharpen_temp = 0.25;
    double ratio_r = 5.0;
    double tau_prior = 0.1;
    double reweight_k = 1.0;
    double label_smoothing = 0.0;

    std::size_t epochs = 40;
    std::size_t labeled_per_class = 25;
    std::size_t unlabeled_batch = 256;
    std::size_t classes_per_batch = 0;  // 0 = use all classes
    std::size_t views = 2;

    double lr_base = 0.05;
    double lr_peak = 0.5;
    std::size_t warmup_epochs = 5;
    double momentum = 0.9;
    double weight_decay = 1e-6;
    double sigma_aug = 0.1;

    std::size_t hidden_dim = 64;
    std::size_t embed_dim = 16;

    std::uint64_t seed = 42;
    Method method = Method::Ropaws;
    // Target pipeline order; false sharpens the raw posterior instead of
    // the renormalized one (ablation).
    bool sharpen_after_renorm = true;

    void validate() const;
};

struct RunConfig {
    TrainConfig train;
    data::GenSpec gen;
};

// Parses `key = value` lines ('#' comments allowed). Throws ParameterError
// on unknown keys or bad values.
RunConfig parse_file(const std::string& path);
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> known_keys();
std::string serialize(const RunConfig& cfg);

std::string method_name(Method m);
Method parse_method(const std::string& name);

}  // namespace ropaws::config
