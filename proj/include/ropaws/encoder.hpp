#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ropaws/matrix.hpp"

// Small MLP encoder mapping raw feature vectors to unit-norm embeddings,
// with exact reverse-mode gradients. Hidden layers use tanh; the final layer
// is linear and its output is normalized onto the sphere.

namespace ropaws::encoder {

inline constexpr double kNormEps = 1e-12;

struct MlpLayer {
    Matrix w;               // out x in
    std::vector<double> b;  // out
};

struct MlpParams {
    std::vector<MlpLayer> layers;
    std::vector<std::size_t> dims;  // [input, hidden..., output]
    std::uint64_t revision = 0;     // bumped on every update; tapes pin it

    std::size_t input_dim() const { return dims.front(); }
    std::size_t output_dim() const { return dims.back(); }
    std::size_t param_count() const;

    // Uniform init scaled by 1/sqrt(fan_in), seeded.
    static MlpParams init(std::vector<std::size_t> dims, std::uint64_t seed);

    // Same shapes, all zeros (gradient / momentum accumulators).
    MlpParams zeros_like() const;

    double get_flat(std::size_t idx) const;
    void set_flat(std::size_t idx, double value);
    void add_flat(std::size_t idx, double delta);
};

struct ForwardTape {
    std::vector<std::vector<double>> activations;  // activations[0] is the input
    std::vector<double> pre_norm;                  // final linear output
    double norm = 0.0;
    std::vector<double> embedding;                 // unit-norm output
    std::uint64_t revision = 0;
};

// Returns the unit-norm embedding and a tape sufficient for backward.
ForwardTape forward(const MlpParams& params, std::span<const double> input);

// Accumulates exact parameter gradients of grad_embedding . z into grads.
// Throws ValidationError if the tape was produced by other parameters.
void backward(const ForwardTape& tape, const MlpParams& params,
              std::span<const double> grad_embedding, MlpParams& grads);

// Max relative error between analytic gradients and central finite
// differences (h = 1e-5) of loss over every parameter.
double grad_check(MlpParams& params, const std::function<double(const MlpParams&)>& loss,
                  const MlpParams& analytic, double h = 1e-5);

// Versioned text checkpoint; round-trips bit-exactly.
void save_checkpoint(const MlpParams& params, const std::string& path);
MlpParams load_checkpoint(const std::string& path);

}  // namespace ropaws::encoder
