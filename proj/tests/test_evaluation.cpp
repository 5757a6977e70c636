#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ropaws/errors.hpp"
#include "ropaws/evaluation.hpp"
#include "ropaws/trainer.hpp"

using namespace ropaws;

TEST_CASE("soft_nn_classify basics") {
    // Single labeled point: the prediction is its label.
    Matrix z(1, 2);
    z(0, 0) = 1.0;
    z(0, 1) = 0.0;
    const kernel::EmbeddingBatch labeled{z};
    const auto labels = kernel::LabelMatrix::one_hot({1}, 3, 0.0);
    const auto cl = eval::soft_nn_classify(std::vector<double>{0.0, 1.0}, labeled, labels);
    CHECK(cl.cls == 1);
    CHECK(cl.confidence == doctest::Approx(1.0));

    // Query nearest to class 0 wins under a sharp kernel.
    Matrix z2(2, 2);
    z2(0, 0) = 1.0;
    z2(1, 1) = 1.0;
    const kernel::EmbeddingBatch two{z2};
    const auto labels2 = kernel::LabelMatrix::one_hot({0, 1}, 2, 0.0);
    const auto near0 =
        eval::soft_nn_classify(std::vector<double>{0.9, std::sqrt(1.0 - 0.81)}, two, labels2, 0.05);
    CHECK(near0.cls == 0);
    CHECK(near0.confidence > 0.9);
}

TEST_CASE("auroc pinned values and properties") {
    CHECK(eval::auroc({0.9, 0.8}, {0.85, 0.1}) == doctest::Approx(0.75));
    CHECK(eval::auroc({0.9, 0.8}, {0.2, 0.1}) == doctest::Approx(1.0));
    CHECK(eval::auroc({0.2, 0.1}, {0.9, 0.8}) == doctest::Approx(0.0));
    // Identical score sets: every comparison is a tie worth one half.
    CHECK(eval::auroc({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(0.5));

    // Rank statistic: invariant under any strictly increasing transform.
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uni(0.1, 2.0);
    std::vector<double> in(13), out(17);
    for (double& v : in) v = uni(rng);
    for (double& v : out) v = uni(rng);
    const double base = eval::auroc(in, out);
    auto cube = [](std::vector<double> v) {
        for (double& x : v) x = x * x * x;
        return v;
    };
    CHECK(eval::auroc(cube(in), cube(out)) == doctest::Approx(base).epsilon(1e-12));

    CHECK_THROWS_AS(eval::auroc({}, {0.5}), ValidationError);
    CHECK_THROWS_AS(eval::auroc({0.5}, {}), ValidationError);
}

TEST_CASE("ece pinned values and validation") {
    // Two samples at confidence 0.6, one correct: |0.5 - 0.6| = 0.1.
    CHECK(eval::ece({0.6, 0.6}, {1, 0}) == doctest::Approx(0.1).epsilon(1e-12));
    // Perfectly calibrated bins (all mass in one bin, accuracy == confidence).
    CHECK(eval::ece({0.75, 0.75, 0.75, 0.75}, {1, 1, 1, 0}) == doctest::Approx(0.0));
    // Fully confident and fully wrong: the worst possible calibration.
    CHECK(eval::ece({1.0, 1.0}, {0, 0}) == doctest::Approx(1.0));
    // Confidence exactly 1 lands in the last bin rather than out of range.
    CHECK(eval::ece({1.0}, {1}) == doctest::Approx(0.0));

    CHECK_THROWS_AS(eval::ece({}, {}), ValidationError);
    CHECK_THROWS_AS(eval::ece({0.5}, {1, 0}), ValidationError);
    CHECK_THROWS_AS(eval::ece({1.5}, {1}), ValidationError);
    CHECK_THROWS_AS(eval::ece({0.5}, {1}, 0), ParameterError);
}

TEST_CASE("nearest_labeled ordering and ties") {
    std::mt19937_64 rng(2);
    const auto labeled = testutil::random_batch(6, 4, rng);
    std::vector<int> classes = {0, 1, 2, 0, 1, 2};

    // A query equal to a support point puts that point first with cosine 1.
    const std::vector<double> self(labeled.z.row(3), labeled.z.row(3) + 4);
    auto nn = eval::nearest_labeled(self, labeled, classes, 3);
    CHECK(nn[0].id == 3);
    CHECK(nn[0].cosine == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(nn[0].cls == 0);

    // Full top_k is a descending permutation of all support points.
    nn = eval::nearest_labeled(self, labeled, classes, 6);
    REQUIRE(nn.size() == 6);
    std::vector<bool> seen(6, false);
    for (std::size_t i = 0; i < nn.size(); ++i) {
        seen[nn[i].id] = true;
        if (i > 0) CHECK(nn[i - 1].cosine >= nn[i].cosine);
    }
    for (const bool s : seen) CHECK(s);

    // Exact cosine ties break toward the lower id.
    Matrix dup(3, 2);
    dup(0, 0) = 1.0;
    dup(1, 0) = 1.0;
    dup(2, 1) = 1.0;
    const kernel::EmbeddingBatch dup_batch{dup};
    nn = eval::nearest_labeled(std::vector<double>{1.0, 0.0}, dup_batch, {0, 1, 2}, 2);
    CHECK(nn[0].id == 0);
    CHECK(nn[1].id == 1);

    CHECK_THROWS_AS(eval::nearest_labeled(self, labeled, classes, 7), ValidationError);
}

TEST_CASE("sskde separates clusters and converges") {
    // Two tight clusters, one seed label each, the rest unlabeled.
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.15);
    const std::size_t per = 10;
    Matrix features(2 * per, 2);
    std::vector<int> labels(2 * per, -1);
    for (std::size_t i = 0; i < per; ++i) {
        features(i, 0) = 0.0 + noise(rng);
        features(i, 1) = 0.0 + noise(rng);
        features(per + i, 0) = 5.0 + noise(rng);
        features(per + i, 1) = 5.0 + noise(rng);
    }
    labels[0] = 0;
    labels[per] = 1;

    const auto p40 = eval::sskde_classify(features, labels, 2);
    for (std::size_t i = 0; i < 2 * per; ++i) {
        const int want = i < per ? 0 : 1;
        CHECK((p40(i, 0) > p40(i, 1) ? 0 : 1) == want);
    }

    // Fixed point: with a strong labeled anchor the interpolation contracts
    // fast enough that one extra round changes nothing measurable.
    std::vector<int> half_labeled(2 * per, -1);
    for (std::size_t i = 0; i < per / 2; ++i) {
        half_labeled[i] = 0;
        half_labeled[per + i] = 1;
    }
    const auto c39 = eval::sskde_classify(features, half_labeled, 2, 0.25, 39);
    const auto c40 = eval::sskde_classify(features, half_labeled, 2, 0.25, 40);
    CHECK(max_abs_diff(c39, c40) <= 1e-6);

    // t = 0 pins labeled rows to their one-hot labels exactly.
    const auto pinned = eval::sskde_classify(features, labels, 2, 0.0, 5);
    CHECK(pinned(0, 0) == doctest::Approx(1.0));
    CHECK(pinned(per, 1) == doctest::Approx(1.0));

    CHECK_THROWS_AS(eval::sskde_classify(features, std::vector<int>(2 * per, -1), 2),
                    ValidationError);
    CHECK_THROWS_AS(eval::sskde_classify(features, {0, 1}, 2), ValidationError);
}

TEST_CASE("propagated_classify approaches the closed form") {
    std::mt19937_64 rng(4);
    const auto labeled = testutil::random_batch(8, 6, rng);
    const auto queries = testutil::random_batch(12, 6, rng);
    const auto labels = testutil::cycled_one_hot(8, 4);
    config::TrainConfig cfg;

    const auto result =
        eval::propagated_classify(queries, labeled, labels, cfg, {1, 3, 400});
    REQUIRE(result.per_iteration.size() == 3);
    CHECK(max_abs_diff(result.per_iteration[2], result.limit) <= 1e-8);
    // Every row of every output is a renormalized distribution.
    for (const auto& m : result.per_iteration)
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                CHECK(m(i, j) >= 0.0);
                s += m(i, j);
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }

    CHECK_THROWS_AS(
        eval::propagated_classify(kernel::EmbeddingBatch{Matrix(0, 6)}, labeled, labels, cfg, {1}),
        ValidationError);
}

TEST_CASE("evaluate produces a coherent report") {
    data::GenSpec spec;
    spec.classes = 3;
    spec.ood_clusters = 3;
    spec.labels_per_class = 8;
    spec.unlabeled_in = 30;
    spec.unlabeled_ood = 30;
    spec.test_count = 40;
    spec.seed = 9;
    const auto ds = data::generate(spec);

    config::TrainConfig cfg;
    cfg.hidden_dim = 16;
    cfg.embed_dim = 6;
    const auto params = encoder::MlpParams::init({ds.dim(), 16, 16, 6}, 11);
    const auto report = eval::evaluate(ds, params, cfg);
    CHECK(report.accuracy >= 0.0);
    CHECK(report.accuracy <= 1.0);
    CHECK(report.conf_in > 0.0);
    CHECK(report.conf_in <= 1.0 + 1e-12);
    CHECK(report.conf_out > 0.0);
    CHECK(report.auroc >= 0.0);
    CHECK(report.auroc <= 1.0);
    CHECK(report.ece >= 0.0);
    CHECK(report.ece <= 1.0);

    // Without an OOD split the OOD fields are deliberately NaN.
    spec.unlabeled_ood = 0;
    spec.ood_clusters = 0;
    const auto curated = data::generate(spec);
    const auto r2 = eval::evaluate(curated, params, cfg);
    CHECK(std::isnan(r2.conf_out));
    CHECK(std::isnan(r2.auroc));
}
