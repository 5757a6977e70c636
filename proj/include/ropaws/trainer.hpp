#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ropaws/config.hpp"
#include "ropaws/data.hpp"
#include "ropaws/encoder.hpp"
#include "ropaws/objective.hpp"

// Training loop: class-balanced labeled batches, two-view Gaussian jitter
// augmentation, calibrated detached targets, SGD with momentum and
// decoupled weight decay under a warmup+cosine schedule.

namespace ropaws::train {

// All randomness flows from one seed through named sub-streams so that
// matched-seed runs of different methods see identical data.
struct RngStreams {
    std::uint64_t seed;

    std::mt19937_64 stream(const std::string& name) const;
};

struct LabeledBatch {
    Matrix inputs;             // class-balanced raw inputs
    std::vector<int> classes;  // per-row class index
    std::size_t class_count = 0;
};

// Exactly per_class samples for each selected class. Throws ValidationError
// naming the class when labels run short.
LabeledBatch sample_labeled_batch(const data::Dataset& dataset, std::size_t per_class,
                                  std::mt19937_64& rng, std::size_t classes_per_batch = 0);

// Two independent jittered copies of input (isotropic Gaussian, std sigma).
std::pair<std::vector<double>, std::vector<double>> augment(std::span<const double> input,
                                                            std::mt19937_64& rng, double sigma);

// Linear warmup from base to peak, then cosine decay to zero.
double lr_schedule(std::size_t step, std::size_t warmup_steps, std::size_t total_steps,
                   double base, double peak);

struct TrainState {
    encoder::MlpParams params;
    encoder::MlpParams velocity;  // momentum buffers
    std::size_t step = 0;
    std::vector<objective::LossReport> history;  // one report per epoch (mean)
};

// One optimizer update on the given batches. The unlabeled batch is raw
// inputs (one row per sample); both views are drawn inside.
objective::LossReport train_step(TrainState& state, const LabeledBatch& labeled,
                                 const Matrix& unlabeled_inputs,
                                 const config::TrainConfig& cfg, std::mt19937_64& aug_rng,
                                 double learning_rate);

// Full run over the dataset's unlabeled pool. Deterministic given
// (cfg, dataset).
TrainState fit(const data::Dataset& dataset, const config::TrainConfig& cfg);

// Shape of the random instance used by loss_grad_check.
struct GradCheckSpec {
    std::size_t labeled_per_class = 2;
    std::size_t classes = 2;
    std::size_t unlabeled = 4;
    std::size_t input_dim = 3;
    std::size_t hidden_dim = 6;
    std::size_t embed_dim = 8;
    std::uint64_t seed = 7;
};

// Finite-difference check of the full training loss on a small random
// instance. Targets and weights are frozen at the initial parameters, mirroring
// the detachment contract of the analytic gradient. Returns the max relative
// error over every encoder parameter.
double loss_grad_check(const config::TrainConfig& cfg, const GradCheckSpec& spec = {});

// Embeds a set of dataset rows with the current encoder (no augmentation).
Matrix embed_rows(const encoder::MlpParams& params, const Matrix& inputs,
                  const std::vector<std::size_t>& rows);

}  // namespace ropaws::train
