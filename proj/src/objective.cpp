#include "ropaws/objective.hpp"

#include <cmath>

#include "ropaws/errors.hpp"

namespace ropaws::objective {

std::vector<double> sharpen(std::span<const double> p, double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("sharpen: temperature must be positive");
    const double a = 1.0 / temperature;
    std::vector<double> out(p.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i] = std::pow(p[i], a);
        s += out[i];
    }
    for (double& v : out) v /= s;
    return out;
}

double cross_entropy(std::span<const double> p, std::span<const double> target) {
    if (p.size() != target.size()) throw ValidationError("cross_entropy: length mismatch");
    double h = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        h -= target[i] * std::log(p[i] > kLogClamp ? p[i] : kLogClamp);
    return h;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (const double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

double me_max(std::span<const double> mean_sharpened) { return entropy(mean_sharpened); }

double in_domain_weight(double in_mass_view1, double in_mass_view2, double power) {
    if (!(power > 0.0)) throw ParameterError("in_domain_weight: power must be positive");
    return std::pow(0.5 * (in_mass_view1 + in_mass_view2), power);
}

namespace {

void check_pair(const ViewPair& pair) {
    const std::size_t m = pair.output1.rows();
    const std::size_t c = pair.output1.cols();
    if (pair.output2.rows() != m || pair.target1.rows() != m || pair.target2.rows() != m ||
        pair.output2.cols() != c || pair.target1.cols() != c || pair.target2.cols() != c ||
        pair.in_mass1.size() != m || pair.in_mass2.size() != m)
        throw ValidationError("ropaws_loss: view pair shapes disagree");
}

// Pullback of rho at p: given g = dL/drho(p), accumulates dL/dp into gp.
void sharpen_vjp(std::span<const double> p, std::span<const double> g, double temperature,
                 std::span<double> gp) {
    const double a = 1.0 / temperature;
    std::vector<double> u(p.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i] > kLogClamp ? p[i] : kLogClamp;
        u[i] = std::pow(pi, a);
        s += u[i];
    }
    double mix = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) mix += g[i] * u[i] / s;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i] > kLogClamp ? p[i] : kLogClamp;
        gp[i] += a * std::pow(pi, a - 1.0) / s * (g[i] - mix);
    }
}

LossReport loss_impl(const ViewPair& pair, double power, double sharpen_temperature,
                     Matrix* grad_output1, Matrix* grad_output2) {
    check_pair(pair);
    const std::size_t m = pair.output1.rows();
    const std::size_t c = pair.output1.cols();
    LossReport report;
    if (m == 0) return report;

    const double inv_2m = 1.0 / (2.0 * static_cast<double>(m));
    if (grad_output1) *grad_output1 = Matrix(m, c);
    if (grad_output2) *grad_output2 = Matrix(m, c);

    // p_bar over sharpened outputs of both views.
    std::vector<double> p_bar(c, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const auto r1 = sharpen({pair.output1.row(i), c}, sharpen_temperature);
        const auto r2 = sharpen({pair.output2.row(i), c}, sharpen_temperature);
        for (std::size_t j = 0; j < c; ++j) p_bar[j] += (r1[j] + r2[j]) * inv_2m;
    }
    report.me_max = entropy(p_bar);

    double weight_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double w = in_domain_weight(pair.in_mass1[i], pair.in_mass2[i], power);
        weight_sum += w;
        const auto t1 = sharpen({pair.target1.row(i), c}, sharpen_temperature);
        const auto t2 = sharpen({pair.target2.row(i), c}, sharpen_temperature);
        report.consistency +=
            w * (cross_entropy({pair.output1.row(i), c}, t2) +
                 cross_entropy({pair.output2.row(i), c}, t1)) *
            inv_2m;

        if (grad_output1) {
            for (std::size_t j = 0; j < c; ++j) {
                const double p1 = pair.output1(i, j);
                const double p2 = pair.output2(i, j);
                if (p1 > kLogClamp) (*grad_output1)(i, j) -= w * t2[j] / p1 * inv_2m;
                if (p2 > kLogClamp) (*grad_output2)(i, j) -= w * t1[j] / p2 * inv_2m;
            }
        }
    }
    report.mean_weight = weight_sum / static_cast<double>(m);
    report.total = report.consistency - report.me_max;

    if (grad_output1) {
        // d(-H(p_bar))/dp_bar_j = log(p_bar_j) + 1, then back through the
        // per-row sharpening.
        std::vector<double> g_bar(c);
        for (std::size_t j = 0; j < c; ++j)
            g_bar[j] = (std::log(p_bar[j] > kLogClamp ? p_bar[j] : kLogClamp) + 1.0) * inv_2m;
        for (std::size_t i = 0; i < m; ++i) {
            sharpen_vjp({pair.output1.row(i), c}, g_bar, sharpen_temperature,
                        {grad_output1->row(i), c});
            sharpen_vjp({pair.output2.row(i), c}, g_bar, sharpen_temperature,
                        {grad_output2->row(i), c});
        }
    }
    return report;
}

}  // namespace

LossReport ropaws_loss(const ViewPair& pair, double power, double sharpen_temperature) {
    return loss_impl(pair, power, sharpen_temperature, nullptr, nullptr);
}

LossReport ropaws_loss_grad(const ViewPair& pair, double power, double sharpen_temperature,
                            Matrix* grad_output1, Matrix* grad_output2) {
    return loss_impl(pair, power, sharpen_temperature, grad_output1, grad_output2);
}

}  // namespace ropaws::objective
