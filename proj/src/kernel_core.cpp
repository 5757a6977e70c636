#include "ropaws/kernel_core.hpp"

#include <cmath>
#include <string>

#include "ropaws/errors.hpp"
#include "ropaws/simd.hpp"

namespace ropaws::kernel {

void check_unit_norm(std::span<const double> v, const char* what) {
    const double n2 = simd::active().dot(v.data(), v.data(), v.size());
    if (std::fabs(std::sqrt(n2) - 1.0) > kUnitNormTol)
        throw ValidationError(std::string(what) + ": embedding is not unit-norm (|z| = " +
                              std::to_string(std::sqrt(n2)) + ")");
}

EmbeddingBatch EmbeddingBatch::from_rows(Matrix rows) {
    for (std::size_t i = 0; i < rows.rows(); ++i)
        check_unit_norm({rows.row(i), rows.cols()}, "EmbeddingBatch");
    return EmbeddingBatch{std::move(rows)};
}

EmbeddingBatch EmbeddingBatch::normalized(Matrix rows) {
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        double* r = rows.row(i);
        const double n = std::sqrt(simd::active().dot(r, r, rows.cols()));
        if (!(n > 0.0) || !std::isfinite(n))
            throw ValidationError("EmbeddingBatch::normalized: zero or non-finite row " +
                                  std::to_string(i));
        simd::active().scale(r, 1.0 / n, rows.cols());
    }
    return EmbeddingBatch{std::move(rows)};
}

LabelMatrix LabelMatrix::from_rows(Matrix rows) {
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < rows.cols(); ++j) {
            if (rows(i, j) < 0.0)
                throw ValidationError("LabelMatrix: negative entry in row " + std::to_string(i));
            s += rows(i, j);
        }
        if (std::fabs(s - 1.0) > 1e-9)
            throw ValidationError("LabelMatrix: row " + std::to_string(i) +
                                  " sums to " + std::to_string(s));
    }
    const std::size_t c = rows.cols();
    return LabelMatrix{std::move(rows), c};
}

LabelMatrix LabelMatrix::one_hot(const std::vector<int>& classes, std::size_t class_count,
                                 double smoothing) {
    if (smoothing < 0.0 || smoothing >= 1.0)
        throw ParameterError("one_hot: smoothing must be in [0, 1)");
    Matrix m(classes.size(), class_count,
             class_count > 0 ? smoothing / static_cast<double>(class_count) : 0.0);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] < 0 || static_cast<std::size_t>(classes[i]) >= class_count)
            throw ValidationError("one_hot: class index out of range at row " + std::to_string(i));
        m(i, static_cast<std::size_t>(classes[i])) += 1.0 - smoothing;
    }
    return LabelMatrix{std::move(m), class_count};
}

void softmax_inplace(std::span<double> x) {
    const auto& k = simd::active();
    const double m = k.reduce_max(x.data(), x.size());
    for (double& v : x) v = std::exp(v - m);
    const double s = k.sum(x.data(), x.size());
    k.scale(x.data(), 1.0 / s, x.size());
}

double kernel_logit(std::span<const double> a, std::span<const double> b, double tau) {
    if (!(tau > 0.0)) throw ParameterError("kernel_logit: tau must be positive");
    if (a.size() != b.size()) throw ValidationError("kernel_logit: dimension mismatch");
    check_unit_norm(a, "kernel_logit(a)");
    check_unit_norm(b, "kernel_logit(b)");
    return simd::active().dot(a.data(), b.data(), a.size()) / tau;
}

namespace {

// Similarity row softmax_tau(query . z_l^T) without re-validating norms.
std::vector<double> similarity_row(std::span<const double> query, const EmbeddingBatch& labeled,
                                   double tau) {
    std::vector<double> logits(labeled.count());
    for (std::size_t j = 0; j < labeled.count(); ++j)
        logits[j] = simd::active().dot(query.data(), labeled.z.row(j), query.size()) / tau;
    softmax_inplace(logits);
    return logits;
}

}  // namespace

std::vector<double> paws_predict(std::span<const double> query, const EmbeddingBatch& labeled,
                                 const LabelMatrix& labels, double tau) {
    if (!(tau > 0.0)) throw ParameterError("paws_predict: tau must be positive");
    if (labeled.count() == 0) throw ValidationError("paws_predict: empty labeled batch");
    if (labels.count() != labeled.count())
        throw ValidationError("paws_predict: label row count mismatch");
    if (query.size() != labeled.dim()) throw ValidationError("paws_predict: dimension mismatch");

    const std::vector<double> sim = similarity_row(query, labeled, tau);
    std::vector<double> pred(labels.class_count, 0.0);
    for (std::size_t j = 0; j < labeled.count(); ++j)
        simd::active().axpy(sim[j], labels.probs.row(j), pred.data(), pred.size());
    return pred;
}

Matrix paws_predict_batch(const EmbeddingBatch& queries, const EmbeddingBatch& labeled,
                          const LabelMatrix& labels, double tau) {
    Matrix out(queries.count(), labels.class_count);
    for (std::size_t i = 0; i < queries.count(); ++i) {
        const auto p = paws_predict({queries.z.row(i), queries.dim()}, labeled, labels, tau);
        for (std::size_t c = 0; c < p.size(); ++c) out(i, c) = p[c];
    }
    return out;
}

void paws_predict_vjp(std::span<const double> query, const EmbeddingBatch& labeled,
                      const LabelMatrix& labels, double tau,
                      std::span<const double> grad_prediction,
                      std::span<double> grad_query, Matrix& grad_labeled) {
    const std::size_t n = labeled.count();
    const std::size_t d = labeled.dim();
    const std::vector<double> sim = similarity_row(query, labeled, tau);

    // dL/ds_j = grad_prediction . labels_j
    std::vector<double> gs(n);
    for (std::size_t j = 0; j < n; ++j)
        gs[j] = simd::active().dot(grad_prediction.data(), labels.probs.row(j),
                                   grad_prediction.size());
    // Softmax pullback: dL/dlogit_j = s_j * (gs_j - sum_k s_k gs_k)
    const double mix = simd::active().dot(sim.data(), gs.data(), n);
    for (std::size_t j = 0; j < n; ++j) {
        const double gl = sim[j] * (gs[j] - mix) / tau;
        simd::active().axpy(gl, labeled.z.row(j), grad_query.data(), d);
        simd::active().axpy(gl, query.data(), grad_labeled.row(j), d);
    }
}

SimilarityBlock similarity_block(const EmbeddingBatch& unlabeled, const EmbeddingBatch& labeled,
                                 double tau, double ratio) {
    if (!(tau > 0.0)) throw ParameterError("similarity_block: tau must be positive");
    if (!(ratio > 0.0)) throw ParameterError("similarity_block: ratio must be positive");
    if (labeled.count() == 0 || unlabeled.count() == 0)
        throw ValidationError("similarity_block: empty batch");
    if (labeled.dim() != unlabeled.dim())
        throw ValidationError("similarity_block: embedding dimension mismatch");

    const std::size_t n = labeled.count();
    const std::size_t m = unlabeled.count();
    const std::size_t d = labeled.dim();
    // r' = r * |B_u| / |B_l|; enters as an additive ln(r') on labeled logits.
    const double log_rprime =
        std::log(ratio * static_cast<double>(m) / static_cast<double>(n));

    SimilarityBlock block;
    block.tau = tau;
    block.ratio = ratio;
    block.to_labeled = Matrix(m, n);
    block.to_unlabeled = Matrix(m, m);

    std::vector<double> row(n + m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* zi = unlabeled.z.row(i);
        for (std::size_t j = 0; j < n; ++j)
            row[j] = simd::active().dot(zi, labeled.z.row(j), d) / tau + log_rprime;
        for (std::size_t j = 0; j < m; ++j)
            row[n + j] = simd::active().dot(zi, unlabeled.z.row(j), d) / tau;
        softmax_inplace(row);
        for (std::size_t j = 0; j < n; ++j) block.to_labeled(i, j) = row[j];
        for (std::size_t j = 0; j < m; ++j) block.to_unlabeled(i, j) = row[n + j];
    }
    return block;
}

double kde_log_density(std::span<const double> query, const EmbeddingBatch& support,
                       std::span<const double> weights, double tau) {
    if (!(tau > 0.0)) throw ParameterError("kde_log_density: tau must be positive");
    if (weights.size() != support.count())
        throw ValidationError("kde_log_density: weight count mismatch");

    // Drop zero-weight terms, then log-sum-exp of logit + ln(w).
    std::vector<double> terms;
    terms.reserve(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] < 0.0) throw ValidationError("kde_log_density: negative weight");
        if (weights[j] == 0.0) continue;
        const double logit =
            simd::active().dot(query.data(), support.z.row(j), query.size()) / tau;
        terms.push_back(logit + std::log(weights[j]));
    }
    if (terms.empty()) throw ValidationError("kde_log_density: all weights are zero");

    const double m = simd::active().reduce_max(terms.data(), terms.size());
    double s = 0.0;
    for (const double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

}  // namespace ropaws::kernel
