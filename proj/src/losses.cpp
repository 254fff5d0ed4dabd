#include "rocgan/losses.hpp"

#include <cmath>

#include "rocgan/errors.hpp"

namespace rocgan {

void LossWeights::validate() const {
    for (double v : {lambda_c, lambda_pi, lambda_ae, lambda_l, lambda_decov})
        if (!std::isfinite(v) || v < 0.0) throw ContractError("loss weights must be finite and non-negative");
}

Tensor adv_loss_d(const Tensor& real_logits, const Tensor& fake_logits) {
    // log(1 - s(x)) = log s(-x)
    return neg(add(mean(log_sigmoid(real_logits)), mean(log_sigmoid(neg(fake_logits)))));
}

Tensor adv_loss_g(const Tensor& fake_logits, GeneratorAdversarial form) {
    if (form == GeneratorAdversarial::minimax) return mean(log_sigmoid(neg(fake_logits)));
    return neg(mean(log_sigmoid(fake_logits)));
}

namespace {

void same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw ContractError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
}

}  // namespace

Tensor l1_mean(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "l1");
    return mean(abs(sub(a, b)));
}

Tensor l2_mean(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "l2");
    return mean(square(sub(a, b)));
}

Tensor content_loss(const Tensor& generated, const Tensor& target) { return l1_mean(generated, target); }

Tensor feature_matching_loss(const Tensor& generated_features, const Tensor& target_features) {
    return l1_mean(generated_features, target_features.detach());
}

Tensor ae_loss(const Tensor& target, const Tensor& reconstruction) { return l1_mean(reconstruction, target); }

Tensor latent_loss(const Tensor& reg_code, const Tensor& ae_code) { return l1_mean(reg_code, ae_code); }

Tensor decov_loss(const Tensor& h) {
    if (h.rank() < 2) throw ContractError("decov_loss expects N x d activations");
    const std::size_t n = h.dim(0);
    if (n < 2) throw ContractError("decov_loss requires a batch of at least 2");
    const std::size_t d = h.numel() / n;
    Tensor x = h.rank() == 2 ? h : reshape(h, {n, d});
    const double inv_n = 1.0 / static_cast<double>(n);
    Tensor ones_col = Tensor::full({n, 1}, 1.0);
    Tensor mu = mul(matmul(transpose(ones_col), x), inv_n);       // 1 x d
    Tensor centered = sub(x, matmul(ones_col, mu));               // N x d
    Tensor cov = mul(matmul(transpose(centered), centered), inv_n);  // d x d
    std::vector<double> eye(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
    Tensor diag = mul(cov, Tensor::from({d, d}, std::move(eye)));
    return mul(sub(sum(square(cov)), sum(square(diag))), 0.5);
}

Tensor total_loss_rocgan(const LossParts& parts, const LossWeights& w) {
    w.validate();
    Tensor total = parts.adv;
    auto term = [&](const Tensor& part, double lambda) {
        if (part.defined()) total = add(total, mul(part, lambda));
    };
    term(parts.content, w.lambda_c);
    term(parts.feature, w.lambda_pi);
    term(parts.ae, w.lambda_ae);
    term(parts.latent, w.lambda_l);
    term(parts.decov, w.lambda_decov);
    return total;
}

}  // namespace rocgan
