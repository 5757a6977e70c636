#include "ropaws/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "ropaws/errors.hpp"
#include "ropaws/simd.hpp"

namespace ropaws::encoder {

std::size_t MlpParams::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.rows() * l.w.cols() + l.b.size();
    return n;
}

MlpParams MlpParams::init(std::vector<std::size_t> dims, std::uint64_t seed) {
    if (dims.size() < 2) throw ParameterError("MlpParams::init: need at least two dims");
    MlpParams p;
    p.dims = std::move(dims);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
        const std::size_t fan_in = p.dims[l];
        const std::size_t fan_out = p.dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        MlpLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
        for (std::size_t i = 0; i < fan_out; ++i)
            for (std::size_t j = 0; j < fan_in; ++j) layer.w(i, j) = dist(rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

MlpParams MlpParams::zeros_like() const {
    MlpParams z;
    z.dims = dims;
    for (const auto& l : layers)
        z.layers.push_back({Matrix(l.w.rows(), l.w.cols()), std::vector<double>(l.b.size(), 0.0)});
    return z;
}

namespace {

// Flat order: per layer, row-major weights then biases.
double* flat_ptr(MlpParams& p, std::size_t idx) {
    for (auto& l : p.layers) {
        const std::size_t wn = l.w.rows() * l.w.cols();
        if (idx < wn) return l.w.data() + idx;
        idx -= wn;
        if (idx < l.b.size()) return l.b.data() + idx;
        idx -= l.b.size();
    }
    throw ValidationError("MlpParams: flat index out of range");
}

}  // namespace

double MlpParams::get_flat(std::size_t idx) const {
    return *flat_ptr(const_cast<MlpParams&>(*this), idx);
}

void MlpParams::set_flat(std::size_t idx, double value) { *flat_ptr(*this, idx) = value; }

void MlpParams::add_flat(std::size_t idx, double delta) { *flat_ptr(*this, idx) += delta; }

ForwardTape forward(const MlpParams& params, std::span<const double> input) {
    if (input.size() != params.input_dim())
        throw ValidationError("encoder::forward: input dimension mismatch");

    ForwardTape tape;
    tape.revision = params.revision;
    tape.activations.emplace_back(input.begin(), input.end());

    const std::size_t nlayers = params.layers.size();
    for (std::size_t l = 0; l < nlayers; ++l) {
        const auto& layer = params.layers[l];
        const auto& in = tape.activations.back();
        std::vector<double> out(layer.b);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += simd::active().dot(layer.w.row(i), in.data(), in.size());
        if (l + 1 < nlayers)
            for (double& v : out) v = std::tanh(v);
        if (l + 1 == nlayers) {
            tape.pre_norm = out;
        }
        tape.activations.push_back(std::move(out));
    }

    const auto& h = tape.pre_norm;
    tape.norm = std::sqrt(simd::active().dot(h.data(), h.data(), h.size()));
    tape.embedding.resize(h.size());
    const double inv = 1.0 / (tape.norm + kNormEps);
    for (std::size_t i = 0; i < h.size(); ++i) tape.embedding[i] = h[i] * inv;
    return tape;
}

void backward(const ForwardTape& tape, const MlpParams& params,
              std::span<const double> grad_embedding, MlpParams& grads) {
    if (tape.revision != params.revision)
        throw ValidationError("encoder::backward: stale tape (parameters changed)");
    if (grad_embedding.size() != params.output_dim())
        throw ValidationError("encoder::backward: gradient dimension mismatch");

    // Normalization pullback: dL/dh = g/(n+eps) - h (h.g)/(n (n+eps)^2).
    const auto& h = tape.pre_norm;
    const double n = tape.norm;
    const double denom = n + kNormEps;
    std::vector<double> grad(h.size());
    const double hg = simd::active().dot(h.data(), grad_embedding.data(), h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        grad[i] = grad_embedding[i] / denom;
        if (n > 0.0) grad[i] -= h[i] * hg / (n * denom * denom);
    }

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const auto& layer = params.layers[l];
        auto& glayer = grads.layers[l];
        const auto& in = tape.activations[l];
        // Hidden layers: pull back through tanh using the stored activation.
        if (l + 1 < params.layers.size()) {
            const auto& act = tape.activations[l + 1];
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - act[i] * act[i];
        }
        std::vector<double> grad_in(in.size(), 0.0);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            glayer.b[i] += grad[i];
            simd::active().axpy(grad[i], in.data(), glayer.w.row(i), in.size());
            simd::active().axpy(grad[i], layer.w.row(i), grad_in.data(), in.size());
        }
        grad = std::move(grad_in);
    }
}

double grad_check(MlpParams& params, const std::function<double(const MlpParams&)>& loss,
                  const MlpParams& analytic, double h) {
    double max_err = 0.0;
    const std::size_t n = params.param_count();
    for (std::size_t i = 0; i < n; ++i) {
        const double orig = params.get_flat(i);
        params.add_flat(i, h);
        params.revision++;
        const double up = loss(params);
        params.add_flat(i, -2.0 * h);
        params.revision++;
        const double down = loss(params);
        params.set_flat(i, orig);
        params.revision++;

        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.get_flat(i);
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        const double err = std::fabs(a - numeric) / denom;
        if (err > max_err) max_err = err;
    }
    return max_err;
}

void save_checkpoint(const MlpParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("save_checkpoint: cannot open " + path);
    out << "ropaws-mlp v1\n";
    out << "dims";
    for (const auto d : params.dims) out << ' ' << d;
    out << '\n';
    char buf[64];
    for (const auto& l : params.layers) {
        for (std::size_t i = 0; i < l.w.rows() * l.w.cols(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g\n", l.w.data()[i]);
            out << buf;
        }
        for (const double b : l.b) {
            std::snprintf(buf, sizeof buf, "%.17g\n", b);
            out << buf;
        }
    }
}

MlpParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("load_checkpoint: cannot open " + path);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "ropaws-mlp" || version != "v1")
        throw ValidationError("load_checkpoint: unrecognized format in " + path);
    std::string key;
    in >> key;
    if (key != "dims") throw ValidationError("load_checkpoint: missing dims header");
    std::string rest;
    std::getline(in, rest);
    std::istringstream dims_in(rest);
    std::vector<std::size_t> dims;
    std::size_t d;
    while (dims_in >> d) dims.push_back(d);
    if (dims.size() < 2) throw ValidationError("load_checkpoint: bad dims header");

    MlpParams p = MlpParams::init(dims, 0).zeros_like();
    p.dims = dims;
    const std::size_t n = p.param_count();
    for (std::size_t i = 0; i < n; ++i) {
        double v;
        if (!(in >> v)) throw ValidationError("load_checkpoint: truncated parameter data");
        p.add_flat(i, v);
    }
    return p;
}

}  // namespace ropaws::encoder
