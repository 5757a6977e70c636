#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ropaws/matrix.hpp"

// Synthetic uncurated-data generators and CSV ingestion. The labeled split
// is always class-balanced; OOD samples never carry a class label.

namespace ropaws::data {

enum class Split { Labeled, UnlabeledIn, UnlabeledOod, Test };

inline constexpr int kOodMarker = -1;

struct Dataset {
    Matrix inputs;                // one sample per row
    std::vector<int> true_class;  // class index, or kOodMarker for OOD
    std::vector<Split> split;
    std::size_t class_count = 0;

    std::size_t count() const { return inputs.rows(); }
    std::size_t dim() const { return inputs.cols(); }
    std::vector<std::size_t> indices(Split s) const;
};

struct GenSpec {
    std::string generator = "gaussian-mixture";  // or "two-moons"
    std::size_t classes = 4;
    std::size_t ood_clusters = 4;
    std::size_t labels_per_class = 25;
    std::size_t unlabeled_in = 2000;
    std::size_t unlabeled_ood = 2000;
    std::size_t test_count = 1000;
    double separation = 6.0;   // adjacent-center distance in units of noise_std
    double noise_std = 0.25;
    std::uint64_t seed = 42;
};

// Deterministic given spec.seed. In-class clusters sit on a ring with OOD
// clusters interleaved between them.
Dataset generate(const GenSpec& spec);

// CSV schema: header `id,label,ood,z0,...,z{d-1}`; label is a class index or
// -1; ood is 0/1. Raw feature values, no normalization.
void save_csv(const Dataset& dataset, Split which, const std::string& path);
void save_csv(const Dataset& dataset, const std::string& data_path,
              const std::string& test_path);

// Loads a data CSV (labeled + unlabeled rows) and optionally a test CSV.
Dataset load_dataset(const std::string& data_path, const std::string& test_path = "");

// Same schema, but rows are precomputed embeddings: re-normalized to unit
// norm on load.
Dataset load_embeddings(const std::string& path);

}  // namespace ropaws::data
