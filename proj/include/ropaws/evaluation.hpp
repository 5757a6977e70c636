#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ropaws/config.hpp"
#include "ropaws/data.hpp"
#include "ropaws/encoder.hpp"
#include "ropaws/kernel_core.hpp"
#include "ropaws/matrix.hpp"

// Soft-NN classification, confidence/AUROC/ECE metrics, label propagation
// at inference, nearest-neighbor inspection and the SSKDE baseline.

namespace ropaws::eval {

struct Classification {
    int cls = -1;
    double confidence = 0.0;
};

struct EvalReport {
    double accuracy = 0.0;  // on in-class test data
    double conf_in = 0.0;   // mean max-probability over unlabeled in-class
    double conf_out = 0.0;  // mean max-probability over unlabeled OOD
    double auroc = 0.0;     // OOD discriminability of max cosine similarity
    double ece = 0.0;       // on test predictions
};

// argmax / max of the soft-NN prediction.
Classification soft_nn_classify(std::span<const double> query,
                                const kernel::EmbeddingBatch& labeled,
                                const kernel::LabelMatrix& labels, double tau = 0.1);

struct PropagationResult {
    std::vector<Matrix> per_iteration;  // renormalized posteriors, one per requested count
    Matrix limit;                       // renormalized closed-form posterior
};

// Treats the queries as a pseudo-unlabeled batch and propagates labels
// through them for each requested iteration count plus the closed form.
PropagationResult propagated_classify(const kernel::EmbeddingBatch& queries,
                                      const kernel::EmbeddingBatch& labeled,
                                      const kernel::LabelMatrix& labels,
                                      const config::TrainConfig& cfg,
                                      const std::vector<std::size_t>& iteration_counts);

// Rank-based AUROC; ties count one half.
double auroc(const std::vector<double>& scores_in, const std::vector<double>& scores_out);

// Equal-width binning on [0, 1].
double ece(const std::vector<double>& confidences, const std::vector<int>& correctness,
           std::size_t bins = 15);

struct Neighbor {
    std::size_t id = 0;
    double cosine = 0.0;
    int cls = -1;
};

// Top-k labeled neighbors in descending cosine order, ties broken by id.
std::vector<Neighbor> nearest_labeled(std::span<const double> query,
                                      const kernel::EmbeddingBatch& labeled,
                                      const std::vector<int>& classes, std::size_t top_k);

// Semi-supervised KDE baseline over fixed features with a Gaussian kernel.
// labels_partial uses -1 for unlabeled rows. gamma <= 0 means 1/d.
Matrix sskde_classify(const Matrix& features, const std::vector<int>& labels_partial,
                      std::size_t class_count, double t = 0.9, std::size_t iters = 40,
                      double gamma = 0.0);

// Full report for a trained encoder on a dataset.
EvalReport evaluate(const data::Dataset& dataset, const encoder::MlpParams& params,
                    const config::TrainConfig& cfg);

// Max cosine similarity to the labeled support (the OOD score).
std::vector<double> max_similarity_scores(const kernel::EmbeddingBatch& queries,
                                          const kernel::EmbeddingBatch& labeled);

}  // namespace ropaws::eval
