#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ropaws/matrix.hpp"

// Sharpening, cross-entropy, mean-entropy-maximization, in-domain
// reweighting and the full consistency loss. Targets and weights are
// gradient-free constants; gradients flow only through the output rows.

namespace ropaws::objective {

inline constexpr double kLogClamp = 1e-12;

// Two augmented views of the same unlabeled batch. Output rows are soft-NN
// predictions (rows sum to 1); target rows are calibrated, renormalized
// posteriors (rows sum to 1) and are treated as detached constants.
struct ViewPair {
    Matrix output1, output2;   // M x C
    Matrix target1, target2;   // M x C
    std::vector<double> in_mass1, in_mass2;  // q(in|x) per view
};

struct LossReport {
    double total = 0.0;        // consistency - me_max
    double consistency = 0.0;  // weighted cross-view cross-entropy
    double me_max = 0.0;       // entropy of the mean sharpened output
    double mean_weight = 0.0;  // average w_i
};

// rho(p)_i = p_i^{1/T} / sum_j p_j^{1/T}
std::vector<double> sharpen(std::span<const double> p, double temperature);

// -sum_i target_i log(max(p_i, 1e-12))
double cross_entropy(std::span<const double> p, std::span<const double> target);

double entropy(std::span<const double> p);

// Entropy of the batch-mean sharpened prediction; the loss subtracts it.
double me_max(std::span<const double> mean_sharpened);

// ((m1 + m2) / 2)^power
double in_domain_weight(double in_mass_view1, double in_mass_view2, double power);

// L = (1/2M) sum_i w_i (H(p1_i, rho(t2_i)) + H(p2_i, rho(t1_i))) - H(p_bar),
// with p_bar the mean of the sharpened outputs.
LossReport ropaws_loss(const ViewPair& pair, double power, double sharpen_temperature);

// Same value, plus dL/doutput1 and dL/doutput2 (targets and weights held
// constant per the detachment contract).
LossReport ropaws_loss_grad(const ViewPair& pair, double power, double sharpen_temperature,
                            Matrix* grad_output1, Matrix* grad_output2);

}  // namespace ropaws::objective
