#pragma once

#include "rocgan/tensor.hpp"

namespace rocgan {

/// Weights of the generator objective. Defaults are the values used for the
/// image experiments; content/feature weights follow the pix2pix convention.
struct LossWeights {
    double lambda_c = 100.0;
    double lambda_pi = 1.0;
    double lambda_ae = 100.0;
    double lambda_l = 25.0;
    double lambda_decov = 1.0;

    void validate() const;
    static LossWeights cgan() { return {100.0, 1.0, 0.0, 0.0, 0.0}; }
};

enum class GeneratorAdversarial { non_saturating, minimax };

// -mean log s(real) - mean log(1 - s(fake)), via stable log-sigmoid.
Tensor adv_loss_d(const Tensor& real_logits, const Tensor& fake_logits);
// Non-saturating: -mean log s(fake). Minimax: mean log(1 - s(fake)).
Tensor adv_loss_g(const Tensor& fake_logits, GeneratorAdversarial form = GeneratorAdversarial::non_saturating);

// Mean absolute error. The gradient at equality is 0.
Tensor l1_mean(const Tensor& a, const Tensor& b);
Tensor content_loss(const Tensor& generated, const Tensor& target);
// The target features are detached; no gradient reaches the target branch.
Tensor feature_matching_loss(const Tensor& generated_features, const Tensor& target_features);
Tensor ae_loss(const Tensor& target, const Tensor& reconstruction);
Tensor latent_loss(const Tensor& reg_code, const Tensor& ae_code);
Tensor l2_mean(const Tensor& a, const Tensor& b);

// 0.5 * (||C||_F^2 - ||diag C||^2) for the 1/N batch covariance of h (N x d;
// higher-rank inputs are flattened per sample).
Tensor decov_loss(const Tensor& h);

struct LossParts {
    Tensor adv;
    Tensor content;
    Tensor feature;
    Tensor ae;      // optional
    Tensor latent;  // optional
    Tensor decov;   // optional
};

// adv + l_c content + l_pi feat + l_ae ae + l_l latent + l_decov decov, summed in
// that order; undefined parts are skipped.
Tensor total_loss_rocgan(const LossParts& parts, const LossWeights& w);

}  // namespace rocgan
