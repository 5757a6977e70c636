#include "ropaws/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ropaws/errors.hpp"
#include "ropaws/kernel_core.hpp"
#include "ropaws/posterior.hpp"
#include "ropaws/simd.hpp"

namespace ropaws::train {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

std::mt19937_64 RngStreams::stream(const std::string& name) const {
    std::seed_seq seq{seed, fnv1a(name)};
    return std::mt19937_64(seq);
}

LabeledBatch sample_labeled_batch(const data::Dataset& dataset, std::size_t per_class,
                                  std::mt19937_64& rng, std::size_t classes_per_batch) {
    const std::size_t c_all = dataset.class_count;
    if (c_all == 0) throw ValidationError("sample_labeled_batch: dataset has no classes");

    // Per-class index pools from the labeled split.
    std::vector<std::vector<std::size_t>> pools(c_all);
    for (const std::size_t i : dataset.indices(data::Split::Labeled))
        pools[static_cast<std::size_t>(dataset.true_class[i])].push_back(i);

    std::vector<std::size_t> classes(c_all);
    for (std::size_t c = 0; c < c_all; ++c) classes[c] = c;
    if (classes_per_batch > 0 && classes_per_batch < c_all) {
        std::shuffle(classes.begin(), classes.end(), rng);
        classes.resize(classes_per_batch);
        std::sort(classes.begin(), classes.end());
    }

    LabeledBatch batch;
    batch.class_count = c_all;
    batch.inputs = Matrix(classes.size() * per_class, dataset.dim());
    std::size_t row = 0;
    for (const std::size_t c : classes) {
        auto& pool = pools[c];
        if (pool.size() < per_class)
            throw ValidationError("sample_labeled_batch: class " + std::to_string(c) + " has " +
                                  std::to_string(pool.size()) + " labels, need " +
                                  std::to_string(per_class));
        // Partial Fisher-Yates draw without replacement.
        for (std::size_t k = 0; k < per_class; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
            std::swap(pool[k], pool[pick(rng)]);
            for (std::size_t j = 0; j < dataset.dim(); ++j)
                batch.inputs(row, j) = dataset.inputs(pool[k], j);
            batch.classes.push_back(static_cast<int>(c));
            ++row;
        }
    }
    return batch;
}

std::pair<std::vector<double>, std::vector<double>> augment(std::span<const double> input,
                                                            std::mt19937_64& rng, double sigma) {
    if (sigma < 0.0) throw ParameterError("augment: sigma must be nonnegative");
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> a(input.begin(), input.end());
    std::vector<double> b(input.begin(), input.end());
    if (sigma > 0.0) {
        for (double& v : a) v += sigma * noise(rng);
        for (double& v : b) v += sigma * noise(rng);
    }
    return {std::move(a), std::move(b)};
}

double lr_schedule(std::size_t step, std::size_t warmup_steps, std::size_t total_steps,
                   double base, double peak) {
    if (warmup_steps > 0 && step < warmup_steps) {
        const double t = static_cast<double>(step) / static_cast<double>(warmup_steps);
        return base + (peak - base) * t;
    }
    if (total_steps <= warmup_steps) return peak;
    const double t = static_cast<double>(step - warmup_steps) /
                     static_cast<double>(total_steps - warmup_steps);
    return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(t, 1.0)));
}

namespace {

struct EncodedBatch {
    kernel::EmbeddingBatch batch;
    std::vector<encoder::ForwardTape> tapes;
};

EncodedBatch encode_all(const encoder::MlpParams& params, const Matrix& inputs) {
    EncodedBatch out;
    Matrix z(inputs.rows(), params.output_dim());
    out.tapes.reserve(inputs.rows());
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        auto tape = encoder::forward(params, {inputs.row(i), inputs.cols()});
        for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = tape.embedding[j];
        out.tapes.push_back(std::move(tape));
    }
    out.batch = kernel::EmbeddingBatch{std::move(z)};
    return out;
}

Matrix sharpen_rows(const Matrix& rows, double temperature) {
    Matrix out(rows.rows(), rows.cols());
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        const auto s = objective::sharpen({rows.row(i), rows.cols()}, temperature);
        for (std::size_t j = 0; j < rows.cols(); ++j) out(i, j) = s[j];
    }
    return out;
}

struct ForwardBundle {
    EncodedBatch enc_l, enc_1, enc_2;
    Matrix out1, out2;
};

ForwardBundle forward_outputs(const encoder::MlpParams& params, const Matrix& labeled_aug,
                              const kernel::LabelMatrix& labels, const Matrix& view1,
                              const Matrix& view2, double tau) {
    ForwardBundle fb;
    fb.enc_l = encode_all(params, labeled_aug);
    fb.enc_1 = encode_all(params, view1);
    fb.enc_2 = encode_all(params, view2);
    fb.out1 = kernel::paws_predict_batch(fb.enc_1.batch, fb.enc_l.batch, labels, tau);
    fb.out2 = kernel::paws_predict_batch(fb.enc_2.batch, fb.enc_l.batch, labels, tau);
    return fb;
}

// Pulls dL/doutput back to parameter gradients through both query views and
// the shared labeled support.
encoder::MlpParams backprop_outputs(const encoder::MlpParams& params, const ForwardBundle& fb,
                                    const kernel::LabelMatrix& labels, double tau,
                                    const Matrix& g1, const Matrix& g2) {
    auto grads = params.zeros_like();
    Matrix grad_labeled_z(fb.enc_l.batch.count(), fb.enc_l.batch.dim());
    std::vector<double> grad_query(fb.enc_1.batch.dim());
    auto pull_view = [&](const EncodedBatch& enc, const Matrix& g) {
        for (std::size_t i = 0; i < enc.batch.count(); ++i) {
            std::fill(grad_query.begin(), grad_query.end(), 0.0);
            kernel::paws_predict_vjp({enc.batch.z.row(i), enc.batch.dim()}, fb.enc_l.batch,
                                     labels, tau, {g.row(i), g.cols()}, grad_query,
                                     grad_labeled_z);
            encoder::backward(enc.tapes[i], params, grad_query, grads);
        }
    };
    pull_view(fb.enc_1, g1);
    pull_view(fb.enc_2, g2);
    for (std::size_t j = 0; j < fb.enc_l.batch.count(); ++j)
        encoder::backward(fb.enc_l.tapes[j], params,
                          {grad_labeled_z.row(j), grad_labeled_z.cols()}, grads);
    return grads;
}

// Target pipeline of RoPAWS for one view, fully detached.
void ropaws_target(const kernel::EmbeddingBatch& view, const kernel::EmbeddingBatch& labeled,
                   const kernel::LabelMatrix& labels, const config::TrainConfig& cfg,
                   Matrix* target, std::vector<double>* in_mass) {
    const auto block = kernel::similarity_block(view, labeled, cfg.tau, cfg.ratio_r);
    const auto prior = posterior::in_domain_prior(view, labeled, cfg.tau_prior);
    const auto post = posterior::posterior_closed_form(block, labels, prior);
    *in_mass = post.in_mass;
    if (cfg.sharpen_after_renorm) {
        *target = posterior::renormalize(post);
    } else {
        // Ablation: sharpening the raw posterior also normalizes it; the
        // loss then applies no further sharpening (handled by the caller).
        *target = sharpen_rows(post.probs, cfg.sharpen_temp);
    }
}

}  // namespace

objective::LossReport train_step(TrainState& state, const LabeledBatch& labeled,
                                 const Matrix& unlabeled_inputs,
                                 const config::TrainConfig& cfg, std::mt19937_64& aug_rng,
                                 double learning_rate) {
    const std::size_t m = unlabeled_inputs.rows();
    const std::size_t dim = unlabeled_inputs.cols();

    // Augment: one jittered copy of each labeled input, two views of each
    // unlabeled input. Draw order is fixed for reproducibility.
    Matrix labeled_aug(labeled.inputs.rows(), dim);
    {
        std::normal_distribution<double> noise(0.0, 1.0);
        for (std::size_t i = 0; i < labeled.inputs.rows(); ++i)
            for (std::size_t j = 0; j < dim; ++j)
                labeled_aug(i, j) =
                    labeled.inputs(i, j) + (cfg.sigma_aug > 0.0 ? cfg.sigma_aug * noise(aug_rng) : 0.0);
    }
    Matrix view1(m, dim), view2(m, dim);
    for (std::size_t i = 0; i < m; ++i) {
        auto [a, b] = augment({unlabeled_inputs.row(i), dim}, aug_rng, cfg.sigma_aug);
        for (std::size_t j = 0; j < dim; ++j) {
            view1(i, j) = a[j];
            view2(i, j) = b[j];
        }
    }

    // Forward passes.
    const std::size_t c_all =
        labeled.class_count > 0
            ? labeled.class_count
            : static_cast<std::size_t>(
                  *std::max_element(labeled.classes.begin(), labeled.classes.end())) + 1;
    const auto labels = kernel::LabelMatrix::one_hot(labeled.classes, c_all, cfg.label_smoothing);
    const auto fb = forward_outputs(state.params, labeled_aug, labels, view1, view2, cfg.tau);

    objective::ViewPair pair;
    pair.output1 = fb.out1;
    pair.output2 = fb.out2;

    double loss_sharpen_temp = cfg.sharpen_temp;
    if (cfg.method == config::Method::Ropaws) {
        ropaws_target(fb.enc_1.batch, fb.enc_l.batch, labels, cfg, &pair.target1, &pair.in_mass1);
        ropaws_target(fb.enc_2.batch, fb.enc_l.batch, labels, cfg, &pair.target2, &pair.in_mass2);
        if (!cfg.sharpen_after_renorm) loss_sharpen_temp = 1.0;
    } else {
        pair.target1 = pair.output1;
        pair.target2 = pair.output2;
        pair.in_mass1.assign(m, 1.0);
        pair.in_mass2.assign(m, 1.0);
    }

    Matrix g1, g2;
    const auto report =
        objective::ropaws_loss_grad(pair, cfg.reweight_k, loss_sharpen_temp, &g1, &g2);
    const auto grads = backprop_outputs(state.params, fb, labels, cfg.tau, g1, g2);

    // SGD with momentum and decoupled weight decay.
    const std::size_t n_params = state.params.param_count();
    for (std::size_t i = 0; i < n_params; ++i) {
        const double v = cfg.momentum * state.velocity.get_flat(i) + grads.get_flat(i);
        state.velocity.set_flat(i, v);
        double w = state.params.get_flat(i);
        w -= learning_rate * cfg.weight_decay * w;
        w -= learning_rate * v;
        state.params.set_flat(i, w);
    }
    state.params.revision++;
    state.step++;
    return report;
}

TrainState fit(const data::Dataset& dataset, const config::TrainConfig& cfg) {
    cfg.validate();
    const RngStreams streams{cfg.seed};

    TrainState state;
    std::vector<std::size_t> enc_dims = {dataset.dim(), cfg.hidden_dim, cfg.hidden_dim,
                                         cfg.embed_dim};
    state.params = encoder::MlpParams::init(enc_dims, streams.stream("init")());
    state.velocity = state.params.zeros_like();

    std::vector<std::size_t> unlabeled;
    for (const auto s : {data::Split::UnlabeledIn, data::Split::UnlabeledOod})
        for (const std::size_t i : dataset.indices(s)) unlabeled.push_back(i);
    if (unlabeled.empty()) throw ValidationError("fit: no unlabeled data");

    const std::size_t batch = std::min(cfg.unlabeled_batch, unlabeled.size());
    const std::size_t steps_per_epoch = (unlabeled.size() + batch - 1) / batch;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    const std::size_t warmup_steps = steps_per_epoch * cfg.warmup_epochs;

    auto batch_rng = streams.stream("batching");
    auto aug_rng = streams.stream("augmentation");

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(unlabeled.begin(), unlabeled.end(), batch_rng);
        objective::LossReport epoch_mean;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const std::size_t begin = s * batch;
            const std::size_t count = std::min(batch, unlabeled.size() - begin);
            Matrix unl(count, dataset.dim());
            for (std::size_t i = 0; i < count; ++i)
                for (std::size_t j = 0; j < dataset.dim(); ++j)
                    unl(i, j) = dataset.inputs(unlabeled[begin + i], j);

            const auto labeled = sample_labeled_batch(dataset, cfg.labeled_per_class, batch_rng,
                                                      cfg.classes_per_batch);
            const double lr = lr_schedule(state.step, warmup_steps, total_steps, cfg.lr_base,
                                          cfg.lr_peak);
            const auto report = train_step(state, labeled, unl, cfg, aug_rng, lr);
            epoch_mean.total += report.total;
            epoch_mean.consistency += report.consistency;
            epoch_mean.me_max += report.me_max;
            epoch_mean.mean_weight += report.mean_weight;
        }
        const double inv = 1.0 / static_cast<double>(steps_per_epoch);
        epoch_mean.total *= inv;
        epoch_mean.consistency *= inv;
        epoch_mean.me_max *= inv;
        epoch_mean.mean_weight *= inv;
        state.history.push_back(epoch_mean);
    }
    return state;
}

double loss_grad_check(const config::TrainConfig& cfg, const GradCheckSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto fill = [&](Matrix& m) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = gauss(rng);
    };

    const std::size_t n = spec.labeled_per_class * spec.classes;
    Matrix labeled_inputs(n, spec.input_dim), view1(spec.unlabeled, spec.input_dim),
        view2(spec.unlabeled, spec.input_dim);
    fill(labeled_inputs);
    fill(view1);
    fill(view2);
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i) classes[i] = static_cast<int>(i % spec.classes);
    const auto labels =
        kernel::LabelMatrix::one_hot(classes, spec.classes, cfg.label_smoothing);

    auto params = encoder::MlpParams::init(
        {spec.input_dim, spec.hidden_dim, spec.embed_dim}, rng());

    // Freeze targets and in-domain masses at the initial parameters.
    const auto fb0 = forward_outputs(params, labeled_inputs, labels, view1, view2, cfg.tau);
    objective::ViewPair frozen;
    double loss_sharpen_temp = cfg.sharpen_temp;
    if (cfg.method == config::Method::Ropaws) {
        ropaws_target(fb0.enc_1.batch, fb0.enc_l.batch, labels, cfg, &frozen.target1,
                      &frozen.in_mass1);
        ropaws_target(fb0.enc_2.batch, fb0.enc_l.batch, labels, cfg, &frozen.target2,
                      &frozen.in_mass2);
        if (!cfg.sharpen_after_renorm) loss_sharpen_temp = 1.0;
    } else {
        frozen.target1 = fb0.out1;
        frozen.target2 = fb0.out2;
        frozen.in_mass1.assign(spec.unlabeled, 1.0);
        frozen.in_mass2.assign(spec.unlabeled, 1.0);
    }

    const auto loss_at = [&](const encoder::MlpParams& p) {
        const auto fb = forward_outputs(p, labeled_inputs, labels, view1, view2, cfg.tau);
        objective::ViewPair pair = frozen;
        pair.output1 = fb.out1;
        pair.output2 = fb.out2;
        return objective::ropaws_loss(pair, cfg.reweight_k, loss_sharpen_temp).total;
    };

    objective::ViewPair pair0 = frozen;
    pair0.output1 = fb0.out1;
    pair0.output2 = fb0.out2;
    Matrix g1, g2;
    objective::ropaws_loss_grad(pair0, cfg.reweight_k, loss_sharpen_temp, &g1, &g2);
    const auto analytic = backprop_outputs(params, fb0, labels, cfg.tau, g1, g2);

    return encoder::grad_check(params, loss_at, analytic);
}

Matrix embed_rows(const encoder::MlpParams& params, const Matrix& inputs,
                  const std::vector<std::size_t>& rows) {
    Matrix z(rows.size(), params.output_dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto tape = encoder::forward(params, {inputs.row(rows[i]), inputs.cols()});
        for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = tape.embedding[j];
    }
    return z;
}

}  // namespace ropaws::train
