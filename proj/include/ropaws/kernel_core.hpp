#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ropaws/matrix.hpp"

// Kernel similarities, KDE log-densities and the soft nearest-neighbor
// prediction. The exponential kernel exp(z.z'/tau) on unit embeddings is the
// only kernel used; its normalizing constant is never materialized since it
// cancels in every posterior ratio.

namespace ropaws::kernel {

inline constexpr double kUnitNormTol = 1e-9;

// Batch of unit-norm embeddings, one per row.
struct EmbeddingBatch {
    Matrix z;

    std::size_t count() const { return z.rows(); }
    std::size_t dim() const { return z.cols(); }

    // Validates every row to unit norm (within 1e-9). Throws ValidationError.
    static EmbeddingBatch from_rows(Matrix rows);
    // Rescales every row to unit norm, then wraps.
    static EmbeddingBatch normalized(Matrix rows);
};

// Per-sample class-probability rows (one-hot or soft), each summing to 1.
struct LabelMatrix {
    Matrix probs;
    std::size_t class_count = 0;

    std::size_t count() const { return probs.rows(); }

    static LabelMatrix from_rows(Matrix rows);
    static LabelMatrix one_hot(const std::vector<int>& classes, std::size_t class_count,
                               double smoothing = 0.0);
};

// Row-softmax similarities of M unlabeled queries against the concatenated
// [labeled | unlabeled] support. Each row of [to_labeled | to_unlabeled]
// sums to 1; the to_unlabeled part alone sums to strictly less than 1.
struct SimilarityBlock {
    Matrix to_labeled;    // M x N
    Matrix to_unlabeled;  // M x M, diagonal (self-similarity) included
    double tau = 0.0;
    double ratio = 0.0;   // the labeled/unlabeled balance r
};

// Returns unit-norm vector; throws ValidationError otherwise.
void check_unit_norm(std::span<const double> v, const char* what);

// log of the unnormalized kernel: (a.b)/tau.
double kernel_logit(std::span<const double> a, std::span<const double> b, double tau);

// Soft nearest-neighbor prediction: softmax_tau(z.z_l^T) . labels.
std::vector<double> paws_predict(std::span<const double> query, const EmbeddingBatch& labeled,
                                 const LabelMatrix& labels, double tau);

// Row-stacked paws_predict over a batch of queries.
Matrix paws_predict_batch(const EmbeddingBatch& queries, const EmbeddingBatch& labeled,
                          const LabelMatrix& labels, double tau);

// Reverse-mode pullback of paws_predict for one query: given dL/dprediction,
// accumulates dL/dquery into grad_query and dL/dz_l into grad_labeled rows.
void paws_predict_vjp(std::span<const double> query, const EmbeddingBatch& labeled,
                      const LabelMatrix& labels, double tau,
                      std::span<const double> grad_prediction,
                      std::span<double> grad_query, Matrix& grad_labeled);

// Joint softmax over labeled and unlabeled supports with the labeled logits
// offset by tau*ln(r'), r' = ratio * M / N.
SimilarityBlock similarity_block(const EmbeddingBatch& unlabeled, const EmbeddingBatch& labeled,
                                 double tau, double ratio);

// log sum_i w_i * exp(z.z_i/tau), max-stabilized. Density up to the global
// constants that cancel in all posteriors.
double kde_log_density(std::span<const double> query, const EmbeddingBatch& support,
                       std::span<const double> weights, double tau);

// Numerically stable softmax over x (in place).
void softmax_inplace(std::span<double> x);

}  // namespace ropaws::kernel
