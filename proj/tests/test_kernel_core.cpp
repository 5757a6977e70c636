#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ropaws/errors.hpp"
#include "ropaws/kernel_core.hpp"

using namespace ropaws;
using kernel::EmbeddingBatch;
using kernel::LabelMatrix;

namespace {

// Brute-force Bayes/KDE oracle: p(y|x) = p(x|y) p(y) / p(x) with
// p(x|y) ∝ (1/n_y) Σ_i p^y_i exp(z·z_i/τ) and p(y) = n_y / N, where n_y is
// the soft class mass Σ_i p^y_i. All normalizers cancel, leaving
// p(y|x) ∝ Σ_i p^y_i exp(z·z_i/τ) -- computed here by naive summation in
// long double.
std::vector<double> bayes_oracle(const double* query, const EmbeddingBatch& labeled,
                                 const LabelMatrix& labels, double tau) {
    const std::size_t c = labels.class_count;
    std::vector<long double> clsmass(c, 0.0L);
    for (std::size_t i = 0; i < labeled.count(); ++i) {
        long double logit = 0.0L;
        for (std::size_t j = 0; j < labeled.dim(); ++j)
            logit += static_cast<long double>(query[j]) * labeled.z(i, j);
        const long double k = std::exp(logit / tau);
        for (std::size_t y = 0; y < c; ++y) clsmass[y] += labels.probs(i, y) * k;
    }
    long double total = 0.0L;
    for (const auto v : clsmass) total += v;
    std::vector<double> out(c);
    for (std::size_t y = 0; y < c; ++y) out[y] = static_cast<double>(clsmass[y] / total);
    return out;
}

}  // namespace

TEST_CASE("kernel_logit pinned values") {
    const std::vector<double> e0 = {1.0, 0.0}, e1 = {0.0, 1.0}, n0 = {-1.0, 0.0};
    CHECK(kernel::kernel_logit(e0, e0, 0.1) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(kernel::kernel_logit(e0, e1, 0.1) == doctest::Approx(0.0));
    CHECK(kernel::kernel_logit(e0, n0, 0.1) == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("kernel_logit validates inputs") {
    const std::vector<double> unit = {1.0, 0.0}, bad = {2.0, 0.0};
    CHECK_THROWS_AS(kernel::kernel_logit(unit, bad, 0.1), ValidationError);
    CHECK_THROWS_AS(kernel::kernel_logit(unit, unit, 0.0), ParameterError);
    CHECK_THROWS_AS(kernel::kernel_logit(unit, unit, -1.0), ParameterError);
}

TEST_CASE("embedding batch construction") {
    Matrix rows(1, 2);
    rows(0, 0) = 3.0;
    rows(0, 1) = 4.0;
    CHECK_THROWS_AS(EmbeddingBatch::from_rows(rows), ValidationError);
    const auto b = EmbeddingBatch::normalized(rows);
    CHECK(b.z(0, 0) == doctest::Approx(0.6));
    CHECK(b.z(0, 1) == doctest::Approx(0.8));
}

TEST_CASE("one-hot labels with smoothing") {
    const auto labels = LabelMatrix::one_hot({0, 2}, 3, 0.3);
    CHECK(labels.probs(0, 0) == doctest::Approx(0.7 + 0.3 / 3));
    CHECK(labels.probs(0, 1) == doctest::Approx(0.3 / 3));
    for (std::size_t i = 0; i < 2; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j) s += labels.probs(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(LabelMatrix::one_hot({0, 3}, 3), ValidationError);
}

TEST_CASE("paws_predict collapse gives exact uniform") {
    // All embeddings identical + class-balanced labels: uniform within 1e-12.
    Matrix rows(4, 3);
    for (std::size_t i = 0; i < 4; ++i) rows(i, 0) = 1.0;
    const auto labeled = EmbeddingBatch::from_rows(rows);
    const auto labels = testutil::cycled_one_hot(4, 4);
    const std::vector<double> query = {1.0, 0.0, 0.0};
    const auto p = kernel::paws_predict(query, labeled, labels, 0.1);
    for (const double v : p) CHECK(std::fabs(v - 0.25) <= 1e-12);
}

TEST_CASE("paws_predict symmetry gives a fifty-fifty split") {
    Matrix rows(2, 2);
    const double s = std::sqrt(0.5);
    rows(0, 0) = s;
    rows(0, 1) = s;
    rows(1, 0) = s;
    rows(1, 1) = -s;
    const auto labeled = EmbeddingBatch::from_rows(rows);
    const auto labels = testutil::cycled_one_hot(2, 2);
    const std::vector<double> query = {1.0, 0.0};
    const auto p = kernel::paws_predict(query, labeled, labels, 0.1);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("paws_predict equals the Bayes/KDE oracle (one-hot and soft)") {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + rng() % 32, c = 2 + rng() % 4, d = 2 + rng() % 6;
        const auto labeled = testutil::random_batch(n, d, rng);
        const auto query = testutil::random_batch(1, d, rng);
        const auto soft = testutil::random_soft_labels(n, c, rng);
        const LabelMatrix onehot = testutil::cycled_one_hot(n, c);
        for (const LabelMatrix* labels : {&onehot, &soft}) {
            const auto p = kernel::paws_predict({query.z.row(0), d}, labeled, *labels, 0.1);
            const auto want = bayes_oracle(query.z.row(0), labeled, *labels, 0.1);
            double sum = 0.0;
            for (std::size_t y = 0; y < labels->class_count; ++y) {
                CHECK(std::fabs(p[y] - want[y]) <= 1e-10);
                CHECK(p[y] >= 0.0);
                sum += p[y];
            }
            CHECK(std::fabs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("paws_predict rejects an empty support") {
    const auto labels = testutil::cycled_one_hot(0, 2);
    const std::vector<double> query = {1.0, 0.0};
    CHECK_THROWS_AS(kernel::paws_predict(query, EmbeddingBatch{Matrix(0, 2)}, labels, 0.1),
                    ValidationError);
}

TEST_CASE("temperature monotonicity with one support point per class") {
    // With one labeled point per class the max entry is 1/(1+Σexp(-Δ/τ)),
    // strictly increasing as τ falls; argmax is preserved throughout.
    std::mt19937_64 rng(5);
    const auto labeled = testutil::random_batch(4, 6, rng);
    const auto labels = testutil::cycled_one_hot(4, 4);
    const auto query = testutil::random_batch(1, 6, rng);
    double prev_max = 0.0;
    std::size_t prev_arg = 0;
    bool first = true;
    for (const double tau : {1.0, 0.5, 0.25, 0.1, 0.05}) {
        const auto p = kernel::paws_predict({query.z.row(0), 6}, labeled, labels, tau);
        std::size_t arg = 0;
        for (std::size_t y = 1; y < 4; ++y)
            if (p[y] > p[arg]) arg = y;
        if (!first) {
            CHECK(p[arg] >= prev_max - 1e-12);
            CHECK(arg == prev_arg);
        }
        prev_max = p[arg];
        prev_arg = arg;
        first = false;
    }
}

TEST_CASE("similarity_block pinned two-point rows") {
    Matrix one(1, 2);
    one(0, 0) = 1.0;
    const auto e = EmbeddingBatch::from_rows(one);

    // N = M = 1 makes r' = ratio, so ratio 1 gives equal logits...
    auto block = kernel::similarity_block(e, e, 0.1, 1.0);
    CHECK(block.to_labeled(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(block.to_unlabeled(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    // ...and ratio 4 gives the softmax of (ln 4, 0): [0.8, 0.2].
    block = kernel::similarity_block(e, e, 0.1, 4.0);
    CHECK(block.to_labeled(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(block.to_unlabeled(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("similarity_block equals the weighted-softmax oracle and row invariants") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 1 + rng() % 8, m = 1 + rng() % 8, d = 2 + rng() % 5;
        const double tau = 0.1 + 0.4 * std::uniform_real_distribution<double>(0, 1)(rng);
        const double ratio = 0.5 + 5.0 * std::uniform_real_distribution<double>(0, 1)(rng);
        const auto labeled = testutil::random_batch(n, d, rng);
        const auto unlabeled = testutil::random_batch(m, d, rng);
        const auto block = kernel::similarity_block(unlabeled, labeled, tau, ratio);
        const double rprime = ratio * static_cast<double>(m) / static_cast<double>(n);

        for (std::size_t i = 0; i < m; ++i) {
            // Weighted-sum oracle: w exp(z.z'/tau) normalized over the
            // concatenated support, w = r' on labeled and 1 on unlabeled.
            long double denom = 0.0L;
            std::vector<long double> lab(n), unl(m);
            for (std::size_t j = 0; j < n; ++j) {
                long double logit = 0.0L;
                for (std::size_t f = 0; f < d; ++f) logit += unlabeled.z(i, f) * labeled.z(j, f);
                lab[j] = rprime * std::exp(logit / tau);
                denom += lab[j];
            }
            for (std::size_t j = 0; j < m; ++j) {
                long double logit = 0.0L;
                for (std::size_t f = 0; f < d; ++f)
                    logit += unlabeled.z(i, f) * unlabeled.z(j, f);
                unl[j] = std::exp(logit / tau);
                denom += unl[j];
            }
            double row_sum = 0.0, unl_sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(block.to_labeled(i, j) ==
                      doctest::Approx(static_cast<double>(lab[j] / denom)).epsilon(1e-10));
                CHECK(block.to_labeled(i, j) > 0.0);
                row_sum += block.to_labeled(i, j);
            }
            for (std::size_t j = 0; j < m; ++j) {
                CHECK(block.to_unlabeled(i, j) ==
                      doctest::Approx(static_cast<double>(unl[j] / denom)).epsilon(1e-10));
                CHECK(block.to_unlabeled(i, j) > 0.0);
                row_sum += block.to_unlabeled(i, j);
                unl_sum += block.to_unlabeled(i, j);
            }
            CHECK(std::fabs(row_sum - 1.0) <= 1e-9);
            CHECK(unl_sum < 1.0);
        }
    }
}

TEST_CASE("kde_log_density pinned values and the naive-sum oracle") {
    Matrix one(1, 2);
    one(0, 0) = 1.0;
    const auto self = EmbeddingBatch::from_rows(one);
    const std::vector<double> q = {1.0, 0.0};
    CHECK(kernel::kde_log_density(q, self, std::vector<double>{1.0}, 0.1) ==
          doctest::Approx(10.0).epsilon(1e-12));

    // A zero weight drops its term entirely.
    Matrix two(2, 2);
    two(0, 0) = 1.0;
    two(1, 1) = 1.0;
    const auto pair = EmbeddingBatch::from_rows(two);
    CHECK(kernel::kde_log_density(q, pair, std::vector<double>{1.0, 0.0}, 0.1) ==
          doctest::Approx(10.0).epsilon(1e-12));

    CHECK_THROWS_AS(kernel::kde_log_density(q, pair, std::vector<double>{0.0, 0.0}, 0.1),
                    ValidationError);

    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 1 + rng() % 16, d = 2 + rng() % 4;
        const auto support = testutil::random_batch(n, d, rng);
        const auto query = testutil::random_batch(1, d, rng);
        std::vector<double> w = testutil::random_prior(n, rng);
        long double naive = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            long double logit = 0.0L;
            for (std::size_t f = 0; f < d; ++f) logit += query.z(0, f) * support.z(i, f);
            naive += w[i] * std::exp(logit / 0.1);
        }
        CHECK(kernel::kde_log_density({query.z.row(0), d}, support, w, 0.1) ==
              doctest::Approx(static_cast<double>(std::log(naive))).epsilon(1e-10));
    }
}

TEST_CASE("paws_predict_vjp matches finite differences") {
    std::mt19937_64 rng(8);
    const std::size_t n = 5, c = 3, d = 4;
    const auto labeled = testutil::random_batch(n, d, rng);
    const auto labels = testutil::random_soft_labels(n, c, rng);
    const auto query = testutil::random_batch(1, d, rng);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> g(c);
    for (double& v : g) v = uni(rng);

    // Scalar objective g . paws_predict. The pullback is defined on the raw
    // (pre-normalization) inputs, so perturbed inputs stay as given.
    const auto value = [&](const double* qv, const Matrix& lz) {
        std::vector<double> p(c, 0.0);
        std::vector<double> logits(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t f = 0; f < d; ++f) s += qv[f] * lz(i, f);
            logits[i] = s / 0.1;
        }
        kernel::softmax_inplace(logits);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t y = 0; y < c; ++y) p[y] += logits[i] * labels.probs(i, y);
        double out = 0.0;
        for (std::size_t y = 0; y < c; ++y) out += g[y] * p[y];
        return out;
    };

    std::vector<double> grad_query(d, 0.0);
    Matrix grad_labeled(n, d);
    kernel::paws_predict_vjp({query.z.row(0), d}, labeled, labels, 0.1, g, grad_query,
                             grad_labeled);

    const double h = 1e-6;
    std::vector<double> qv(query.z.row(0), query.z.row(0) + d);
    for (std::size_t f = 0; f < d; ++f) {
        auto hi = qv, lo = qv;
        hi[f] += h;
        lo[f] -= h;
        const double fd = (value(hi.data(), labeled.z) - value(lo.data(), labeled.z)) / (2 * h);
        CHECK(grad_query[f] == doctest::Approx(fd).epsilon(1e-5));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < d; ++f) {
            auto hi = labeled.z, lo = labeled.z;
            hi(i, f) += h;
            lo(i, f) -= h;
            const double fd = (value(qv.data(), hi) - value(qv.data(), lo)) / (2 * h);
            CHECK(grad_labeled(i, f) == doctest::Approx(fd).epsilon(1e-5));
        }
}

TEST_CASE("softmax_inplace is stable and normalized") {
    std::vector<double> x = {1000.0, 1000.0, 999.0};
    kernel::softmax_inplace(x);
    double s = 0.0;
    for (const double v : x) {
        CHECK(std::isfinite(v));
        s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x[0] == doctest::Approx(x[1]).epsilon(1e-12));
}
