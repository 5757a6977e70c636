#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "ropaws/encoder.hpp"
#include "ropaws/errors.hpp"

using namespace ropaws;
using encoder::MlpParams;

namespace {

double norm_of(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("forward produces unit-norm embeddings") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    auto params = MlpParams::init({3, 8, 5}, 42);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> input = {uni(rng), uni(rng), uni(rng)};
        const auto tape = encoder::forward(params, input);
        CHECK(std::fabs(norm_of(tape.embedding) - 1.0) <= 1e-9);
        CHECK(tape.activations.front() == input);
    }
}

TEST_CASE("forward survives all-zero parameters") {
    auto params = MlpParams::init({2, 4, 3}, 1);
    for (std::size_t i = 0; i < params.param_count(); ++i) params.set_flat(i, 0.0);
    const auto tape = encoder::forward(params, std::vector<double>{1.0, -1.0});
    for (const double v : tape.embedding) CHECK(std::isfinite(v));
}

TEST_CASE("forward rejects a wrong input dimension") {
    const auto params = MlpParams::init({3, 4, 2}, 7);
    CHECK_THROWS_AS(encoder::forward(params, std::vector<double>{1.0, 2.0}), ValidationError);
}

TEST_CASE("backward zero and tangent-space cases") {
    auto params = MlpParams::init({3, 6, 4}, 5);
    const auto tape = encoder::forward(params, std::vector<double>{0.3, -0.7, 0.2});

    auto grads = params.zeros_like();
    encoder::backward(tape, params, std::vector<double>(4, 0.0), grads);
    for (std::size_t i = 0; i < grads.param_count(); ++i) CHECK(grads.get_flat(i) == 0.0);

    // A gradient parallel to z is annihilated by the normalization Jacobian.
    grads = params.zeros_like();
    encoder::backward(tape, params, tape.embedding, grads);
    for (std::size_t i = 0; i < grads.param_count(); ++i)
        CHECK(std::fabs(grads.get_flat(i)) <= 1e-10);
}

TEST_CASE("backward rejects a stale tape") {
    auto params = MlpParams::init({2, 4, 3}, 9);
    const auto tape = encoder::forward(params, std::vector<double>{0.5, 0.5});
    params.revision++;
    auto grads = params.zeros_like();
    CHECK_THROWS_AS(encoder::backward(tape, params, std::vector<double>(3, 0.1), grads),
                    ValidationError);
}

TEST_CASE("grad_check on simple losses") {
    auto params = MlpParams::init({3, 6, 4}, 17);
    const std::vector<double> input = {0.4, -0.2, 0.9};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> direction(4);
    for (double& v : direction) v = uni(rng);

    SUBCASE("linear loss direction . z") {
        const auto loss = [&](const MlpParams& p) {
            const auto tape = encoder::forward(p, input);
            double s = 0.0;
            for (std::size_t j = 0; j < 4; ++j) s += direction[j] * tape.embedding[j];
            return s;
        };
        const auto tape = encoder::forward(params, input);
        auto analytic = params.zeros_like();
        encoder::backward(tape, params, direction, analytic);
        CHECK(encoder::grad_check(params, loss, analytic) <= 1e-6);
    }

    SUBCASE("quadratic loss |z - direction|^2") {
        const auto loss = [&](const MlpParams& p) {
            const auto tape = encoder::forward(p, input);
            double s = 0.0;
            for (std::size_t j = 0; j < 4; ++j) {
                const double d = tape.embedding[j] - direction[j];
                s += d * d;
            }
            return s;
        };
        const auto tape = encoder::forward(params, input);
        std::vector<double> g(4);
        for (std::size_t j = 0; j < 4; ++j) g[j] = 2.0 * (tape.embedding[j] - direction[j]);
        auto analytic = params.zeros_like();
        encoder::backward(tape, params, g, analytic);
        CHECK(encoder::grad_check(params, loss, analytic) <= 1e-6);
    }
}

TEST_CASE("initialization is deterministic and flat accessors round-trip") {
    const auto a = MlpParams::init({4, 8, 8, 3}, 123);
    const auto b = MlpParams::init({4, 8, 8, 3}, 123);
    const auto c = MlpParams::init({4, 8, 8, 3}, 124);
    REQUIRE(a.param_count() == b.param_count());
    bool all_equal = true, any_diff = false;
    for (std::size_t i = 0; i < a.param_count(); ++i) {
        all_equal &= a.get_flat(i) == b.get_flat(i);
        any_diff |= a.get_flat(i) != c.get_flat(i);
    }
    CHECK(all_equal);
    CHECK(any_diff);

    auto m = a;
    m.set_flat(5, 0.125);
    CHECK(m.get_flat(5) == 0.125);
    m.add_flat(5, 0.25);
    CHECK(m.get_flat(5) == 0.375);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const auto params = MlpParams::init({3, 7, 4}, 77);
    const auto path = std::filesystem::temp_directory_path() / "ropaws_ckpt_test.txt";
    encoder::save_checkpoint(params, path.string());
    const auto loaded = encoder::load_checkpoint(path.string());
    std::filesystem::remove(path);

    REQUIRE(loaded.dims == params.dims);
    REQUIRE(loaded.param_count() == params.param_count());
    for (std::size_t i = 0; i < params.param_count(); ++i)
        CHECK(loaded.get_flat(i) == params.get_flat(i));
}

TEST_CASE("load_checkpoint rejects garbage") {
    const auto path = std::filesystem::temp_directory_path() / "ropaws_ckpt_bad.txt";
    {
        FILE* f = std::fopen(path.string().c_str(), "w");
        std::fputs("not a checkpoint\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(encoder::load_checkpoint(path.string()), ValidationError);
    std::filesystem::remove(path);
}
