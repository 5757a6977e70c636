#include "ropaws/posterior.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "ropaws/errors.hpp"
#include "ropaws/simd.hpp"

namespace ropaws::posterior {

namespace {

void check_inputs(const kernel::SimilarityBlock& block, const kernel::LabelMatrix& labels,
                  const PriorVector& prior) {
    const std::size_t m = block.to_unlabeled.rows();
    if (block.to_unlabeled.cols() != m)
        throw ValidationError("posterior: s_u must be square");
    if (block.to_labeled.rows() != m)
        throw ValidationError("posterior: s_l row count mismatch");
    if (labels.count() != block.to_labeled.cols())
        throw ValidationError("posterior: label rows must match s_l columns");
    if (prior.count() != m) throw ValidationError("posterior: prior length mismatch");
    for (const double p : prior.values)
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("posterior: prior entry outside [0, 1]");
}

// a = D s_l labels  (M x C), b = D s_u  (M x M), D = diag(prior).
std::pair<Matrix, Matrix> propagation_terms(const kernel::SimilarityBlock& block,
                                            const kernel::LabelMatrix& labels,
                                            const PriorVector& prior) {
    Matrix a = matmul(block.to_labeled, labels.probs);
    Matrix b = block.to_unlabeled;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        simd::active().scale(a.row(i), prior.values[i], a.cols());
        simd::active().scale(b.row(i), prior.values[i], b.cols());
    }
    return {std::move(a), std::move(b)};
}

PosteriorMatrix wrap(Matrix probs) {
    std::vector<double> mass(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i)
        mass[i] = simd::active().sum(probs.row(i), probs.cols());
    return PosteriorMatrix{std::move(probs), std::move(mass)};
}

}  // namespace

PriorVector in_domain_prior(const kernel::EmbeddingBatch& unlabeled,
                            const kernel::EmbeddingBatch& labeled, double tau_prior) {
    if (!(tau_prior > 0.0)) throw ParameterError("in_domain_prior: tau_prior must be positive");
    if (labeled.count() == 0) throw ValidationError("in_domain_prior: empty labeled batch");
    if (unlabeled.count() > 0 && labeled.dim() != unlabeled.dim())
        throw ValidationError("in_domain_prior: dimension mismatch");

    PriorVector prior;
    prior.values.resize(unlabeled.count());
    for (std::size_t i = 0; i < unlabeled.count(); ++i) {
        double best = -2.0;
        for (std::size_t j = 0; j < labeled.count(); ++j) {
            const double c =
                simd::active().dot(unlabeled.z.row(i), labeled.z.row(j), labeled.dim());
            if (c > best) best = c;
        }
        // Unit vectors keep c <= 1, so the prior lands in (0, 1].
        prior.values[i] = std::exp((best - 1.0) / tau_prior);
    }
    return prior;
}

PosteriorMatrix posterior_closed_form(const kernel::SimilarityBlock& block,
                                      const kernel::LabelMatrix& labels,
                                      const PriorVector& prior) {
    check_inputs(block, labels, prior);
    const std::size_t m = block.to_unlabeled.rows();
    if (m == 0) return PosteriorMatrix{Matrix(0, labels.class_count), {}};

    auto [a, b] = propagation_terms(block, labels, prior);
    Matrix lhs(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) lhs(i, j) = (i == j ? 1.0 : 0.0) - b(i, j);

    Matrix q = solve_dense(lhs, a);

    // Residual check: (I - b) q must reproduce a.
    const Matrix back = matmul(lhs, q);
    const double resid = max_abs_diff(back, a);
    if (!(resid <= 1e-8))
        throw NumericalError("posterior_closed_form: solve residual " + std::to_string(resid));

    return wrap(std::move(q));
}

PosteriorMatrix posterior_iterative_from(const kernel::SimilarityBlock& block,
                                         const kernel::LabelMatrix& labels,
                                         const PriorVector& prior, Matrix q0,
                                         std::size_t iters) {
    check_inputs(block, labels, prior);
    const std::size_t m = block.to_unlabeled.rows();
    if (m == 0) return PosteriorMatrix{Matrix(0, labels.class_count), {}};
    if (q0.rows() != m || q0.cols() != labels.class_count)
        throw ValidationError("posterior_iterative: q0 shape mismatch");

    auto [a, b] = propagation_terms(block, labels, prior);
    Matrix q = std::move(q0);
    for (std::size_t it = 0; it < iters; ++it) {
        Matrix next = matmul(b, q);
        for (std::size_t i = 0; i < m; ++i)
            simd::active().axpy(1.0, a.row(i), next.row(i), a.cols());
        q = std::move(next);
    }
    return wrap(std::move(q));
}

PosteriorMatrix posterior_iterative(const kernel::SimilarityBlock& block,
                                    const kernel::LabelMatrix& labels, const PriorVector& prior,
                                    std::size_t iters) {
    const std::size_t m = block.to_unlabeled.rows();
    const std::size_t c = labels.class_count;
    Matrix q0(m, c);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j)
            q0(i, j) = prior.values.at(i) / static_cast<double>(c);
    return posterior_iterative_from(block, labels, prior, std::move(q0), iters);
}

Matrix renormalize(const PosteriorMatrix& posterior) {
    Matrix out = posterior.probs;
    const std::size_t c = out.cols();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const double deficit = (1.0 - posterior.in_mass[i]) / static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j) out(i, j) += deficit;
    }
    return out;
}

std::vector<double> ood_posterior(const PosteriorMatrix& posterior) {
    std::vector<double> out(posterior.count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - posterior.in_mass[i];
    return out;
}

}  // namespace ropaws::posterior
