#include "ropaws/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ropaws/errors.hpp"
#include "ropaws/posterior.hpp"
#include "ropaws/simd.hpp"
#include "ropaws/trainer.hpp"

namespace ropaws::eval {

Classification soft_nn_classify(std::span<const double> query,
                                const kernel::EmbeddingBatch& labeled,
                                const kernel::LabelMatrix& labels, double tau) {
    const auto p = kernel::paws_predict(query, labeled, labels, tau);
    Classification out;
    for (std::size_t c = 0; c < p.size(); ++c) {
        if (p[c] > out.confidence) {
            out.confidence = p[c];
            out.cls = static_cast<int>(c);
        }
    }
    return out;
}

PropagationResult propagated_classify(const kernel::EmbeddingBatch& queries,
                                      const kernel::EmbeddingBatch& labeled,
                                      const kernel::LabelMatrix& labels,
                                      const config::TrainConfig& cfg,
                                      const std::vector<std::size_t>& iteration_counts) {
    if (queries.count() == 0) throw ValidationError("propagated_classify: empty query batch");
    const auto block = kernel::similarity_block(queries, labeled, cfg.tau, cfg.ratio_r);
    const auto prior = posterior::in_domain_prior(queries, labeled, cfg.tau_prior);

    PropagationResult result;
    for (const std::size_t iters : iteration_counts) {
        const auto post = posterior::posterior_iterative(block, labels, prior, iters);
        result.per_iteration.push_back(posterior::renormalize(post));
    }
    result.limit = posterior::renormalize(posterior::posterior_closed_form(block, labels, prior));
    return result;
}

double auroc(const std::vector<double>& scores_in, const std::vector<double>& scores_out) {
    if (scores_in.empty() || scores_out.empty())
        throw ValidationError("auroc: both score lists must be nonempty");
    // Mann-Whitney via sorted out-scores: count out < in, ties half.
    std::vector<double> out_sorted = scores_out;
    std::sort(out_sorted.begin(), out_sorted.end());
    double wins = 0.0;
    for (const double s : scores_in) {
        const auto lo = std::lower_bound(out_sorted.begin(), out_sorted.end(), s);
        const auto hi = std::upper_bound(out_sorted.begin(), out_sorted.end(), s);
        wins += static_cast<double>(lo - out_sorted.begin()) + 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(scores_in.size()) * static_cast<double>(scores_out.size()));
}

double ece(const std::vector<double>& confidences, const std::vector<int>& correctness,
           std::size_t bins) {
    if (confidences.empty()) throw ValidationError("ece: empty input");
    if (confidences.size() != correctness.size())
        throw ValidationError("ece: length mismatch");
    if (bins == 0) throw ParameterError("ece: bins must be positive");

    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double c = confidences[i];
        if (c < 0.0 || c > 1.0) throw ValidationError("ece: confidence outside [0, 1]");
        std::size_t b = static_cast<std::size_t>(c * static_cast<double>(bins));
        if (b == bins) b = bins - 1;  // confidence exactly 1
        conf_sum[b] += c;
        acc_sum[b] += correctness[i] ? 1.0 : 0.0;
        count[b]++;
    }
    double err = 0.0;
    const double n = static_cast<double>(confidences.size());
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double nb = static_cast<double>(count[b]);
        err += nb / n * std::fabs(acc_sum[b] / nb - conf_sum[b] / nb);
    }
    return err;
}

std::vector<Neighbor> nearest_labeled(std::span<const double> query,
                                      const kernel::EmbeddingBatch& labeled,
                                      const std::vector<int>& classes, std::size_t top_k) {
    if (top_k > labeled.count())
        throw ValidationError("nearest_labeled: top_k exceeds labeled count");
    std::vector<Neighbor> all(labeled.count());
    for (std::size_t j = 0; j < labeled.count(); ++j) {
        all[j].id = j;
        all[j].cosine = simd::active().dot(query.data(), labeled.z.row(j), query.size());
        all[j].cls = classes[j];
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.cosine != b.cosine) return a.cosine > b.cosine;
        return a.id < b.id;
    });
    all.resize(top_k);
    return all;
}

Matrix sskde_classify(const Matrix& features, const std::vector<int>& labels_partial,
                      std::size_t class_count, double t, std::size_t iters, double gamma) {
    const std::size_t n = features.rows();
    if (labels_partial.size() != n) throw ValidationError("sskde: label length mismatch");
    bool any_labeled = false;
    for (const int l : labels_partial) any_labeled |= l >= 0;
    if (!any_labeled) throw ValidationError("sskde: needs at least one labeled sample");
    if (gamma <= 0.0) gamma = 1.0 / static_cast<double>(features.cols());

    // Full Gaussian kernel matrix.
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double d2 = 0.0;
            for (std::size_t f = 0; f < features.cols(); ++f) {
                const double d = features(i, f) - features(j, f);
                d2 += d * d;
            }
            k(i, j) = k(j, i) = std::exp(-gamma * d2);
        }
    }

    // Initial beliefs: one-hot for labeled rows, uniform for unlabeled.
    Matrix p(n, class_count, 1.0 / static_cast<double>(class_count));
    for (std::size_t i = 0; i < n; ++i) {
        if (labels_partial[i] < 0) continue;
        for (std::size_t c = 0; c < class_count; ++c) p(i, c) = 0.0;
        p(i, static_cast<std::size_t>(labels_partial[i])) = 1.0;
    }

    for (std::size_t it = 0; it < iters; ++it) {
        Matrix next = matmul(k, p);
        for (std::size_t i = 0; i < n; ++i) {
            const double row_sum = simd::active().sum(next.row(i), class_count);
            simd::active().scale(next.row(i), 1.0 / row_sum, class_count);
            if (labels_partial[i] >= 0) {
                // Labeled rows interpolate toward ground truth.
                for (std::size_t c = 0; c < class_count; ++c) next(i, c) *= t;
                next(i, static_cast<std::size_t>(labels_partial[i])) += 1.0 - t;
            }
        }
        p = std::move(next);
    }
    return p;
}

std::vector<double> max_similarity_scores(const kernel::EmbeddingBatch& queries,
                                          const kernel::EmbeddingBatch& labeled) {
    std::vector<double> scores(queries.count());
    for (std::size_t i = 0; i < queries.count(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < labeled.count(); ++j)
            best = std::max(best, simd::active().dot(queries.z.row(i), labeled.z.row(j),
                                                     labeled.dim()));
        scores[i] = best;
    }
    return scores;
}

EvalReport evaluate(const data::Dataset& dataset, const encoder::MlpParams& params,
                    const config::TrainConfig& cfg) {
    const auto labeled_idx = dataset.indices(data::Split::Labeled);
    if (labeled_idx.empty()) throw ValidationError("evaluate: dataset has no labeled split");

    const auto embed = [&](const std::vector<std::size_t>& rows) {
        return kernel::EmbeddingBatch{train::embed_rows(params, dataset.inputs, rows)};
    };
    const auto labeled = embed(labeled_idx);
    std::vector<int> labeled_classes;
    for (const std::size_t i : labeled_idx) labeled_classes.push_back(dataset.true_class[i]);
    const auto labels =
        kernel::LabelMatrix::one_hot(labeled_classes, dataset.class_count, cfg.label_smoothing);

    EvalReport report;
    const auto test_idx = dataset.indices(data::Split::Test);
    if (!test_idx.empty()) {
        const auto test = embed(test_idx);
        std::vector<double> confidences;
        std::vector<int> correct;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < test.count(); ++i) {
            const auto cl =
                soft_nn_classify({test.z.row(i), test.dim()}, labeled, labels, cfg.tau);
            const bool ok = cl.cls == dataset.true_class[test_idx[i]];
            hits += ok ? 1 : 0;
            confidences.push_back(std::min(cl.confidence, 1.0));
            correct.push_back(ok ? 1 : 0);
        }
        report.accuracy = static_cast<double>(hits) / static_cast<double>(test.count());
        report.ece = ece(confidences, correct);
    }

    const auto in_idx = dataset.indices(data::Split::UnlabeledIn);
    const auto out_idx = dataset.indices(data::Split::UnlabeledOod);
    auto mean_conf = [&](const std::vector<std::size_t>& rows) {
        if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
        const auto z = embed(rows);
        double s = 0.0;
        for (std::size_t i = 0; i < z.count(); ++i)
            s += soft_nn_classify({z.z.row(i), z.dim()}, labeled, labels, cfg.tau).confidence;
        return s / static_cast<double>(z.count());
    };
    report.conf_in = mean_conf(in_idx);
    report.conf_out = mean_conf(out_idx);

    if (!in_idx.empty() && !out_idx.empty()) {
        report.auroc = auroc(max_similarity_scores(embed(in_idx), labeled),
                             max_similarity_scores(embed(out_idx), labeled));
    } else {
        report.auroc = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

}  // namespace ropaws::eval
