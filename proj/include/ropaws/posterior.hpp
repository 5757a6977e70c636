#pragma once

#include <cstddef>
#include <vector>

#include "ropaws/kernel_core.hpp"
#include "ropaws/matrix.hpp"

// The semi-supervised posterior: in-domain prior, closed-form matrix solve,
// iterative fixed-point propagation and final renormalization.

namespace ropaws::posterior {

// Per-unlabeled-sample in-domain prior, entries in (0, 1].
struct PriorVector {
    std::vector<double> values;

    std::size_t count() const { return values.size(); }
    static PriorVector ones(std::size_t m) { return PriorVector{std::vector<double>(m, 1.0)}; }
};

// M x C unnormalized class posteriors; row sums in (0, 1] and equal to the
// posterior in-domain probability of the sample.
struct PosteriorMatrix {
    Matrix probs;
    std::vector<double> in_mass;

    std::size_t count() const { return probs.rows(); }
};

// Entry i is max_j exp((z_i . z_j - 1) / tau_prior).
PriorVector in_domain_prior(const kernel::EmbeddingBatch& unlabeled,
                            const kernel::EmbeddingBatch& labeled, double tau_prior);

// Solves (I - D s_u) Q = D s_l P with D = diag(prior). Throws NumericalError
// if the solve residual exceeds 1e-8.
PosteriorMatrix posterior_closed_form(const kernel::SimilarityBlock& block,
                                      const kernel::LabelMatrix& labels,
                                      const PriorVector& prior);

// Runs the propagation q <- a p + b q for `iters` steps from the uniform
// prior split q0_{i,y} = prior_i / C.
PosteriorMatrix posterior_iterative(const kernel::SimilarityBlock& block,
                                    const kernel::LabelMatrix& labels, const PriorVector& prior,
                                    std::size_t iters);

// Same iteration from a caller-supplied starting point (the limit does not
// depend on it; used by the initialization-independence tests).
PosteriorMatrix posterior_iterative_from(const kernel::SimilarityBlock& block,
                                         const kernel::LabelMatrix& labels,
                                         const PriorVector& prior, Matrix q0, std::size_t iters);

// Redistributes each row's deficient mass uniformly: q + (1 - sum q) / C.
Matrix renormalize(const PosteriorMatrix& posterior);

// 1 - row sum per sample.
std::vector<double> ood_posterior(const PosteriorMatrix& posterior);

}  // namespace ropaws::posterior
