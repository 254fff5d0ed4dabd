#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rocgan/errors.hpp"
#include "rocgan/gradcheck.hpp"
#include "rocgan/losses.hpp"

using namespace rocgan;

TEST_CASE("generator adversarial gradient at a zero logit is -0.5 per batch element") {
    for (std::size_t n : {1, 4, 10}) {
        Tensor logits = Tensor::zeros({n, 1}, true);
        adv_loss_g(logits).backward();
        for (std::size_t i = 0; i < n; ++i) CHECK(logits.grad()[i] == doctest::Approx(-0.5 / double(n)).epsilon(1e-14));
    }
}

TEST_CASE("discriminator loss at zero logits is 2 log 2") {
    const Tensor z = Tensor::zeros({5, 1});
    CHECK(adv_loss_d(z, z).item() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("adversarial losses stay finite for extreme logits") {
    const Tensor big = Tensor::from({2, 1}, {800.0, -800.0});
    CHECK(std::isfinite(adv_loss_d(big, big).item()));
    CHECK(std::isfinite(adv_loss_g(big).item()));
    CHECK(std::isfinite(adv_loss_g(big, GeneratorAdversarial::minimax).item()));
}

TEST_CASE("minimax generator loss is log(1 - sigmoid)") {
    const Tensor x = Tensor::from({1, 1}, {0.3});
    CHECK(adv_loss_g(x, GeneratorAdversarial::minimax).item() ==
          doctest::Approx(std::log(1 - 1 / (1 + std::exp(-0.3)))).epsilon(1e-14));
}

TEST_CASE("l1 mean and its zero subgradient at equality") {
    const Tensor a = test::seq({8}, [](double i) { return i * 0.25; });
    const Tensor b = test::seq({8}, [](double i) { return std::sin(i); });
    CHECK(l1_mean(a, b).item() == doctest::Approx(1.0559755091281142).epsilon(1e-14));
    Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
    l1_mean(x, x.detach()).backward();
    for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("feature matching does not push gradient into the target branch") {
    Tensor gen = Tensor::from({1, 2}, {1.0, 2.0}, true);
    Tensor target = Tensor::from({1, 2}, {0.0, 5.0}, true);
    feature_matching_loss(gen, target).backward();
    CHECK(gen.grad()[0] == 0.5);
    CHECK(gen.grad()[1] == -0.5);
    CHECK_FALSE(target.has_grad());
}

TEST_CASE("latent loss is the l1 distance of the codes and reaches both encoders") {
    Tensor r = Tensor::from({1, 2}, {1.0, -1.0}, true);
    Tensor a = Tensor::from({1, 2}, {0.0, 1.0}, true);
    const Tensor l = latent_loss(r, a);
    CHECK(l.item() == doctest::Approx(1.5));
    l.backward();
    CHECK(r.grad()[0] == 0.5);
    CHECK(a.grad()[0] == -0.5);
}

TEST_CASE("decov loss reference values") {
    CHECK(decov_loss(Tensor::from({2, 2}, {1, 1, -1, -1})).item() == doctest::Approx(1.0).epsilon(1e-14));
    const Tensor h = test::seq({4, 3}, [](double i) { return std::sin(1.3 * i + 0.2); });
    CHECK(decov_loss(h).item() == doctest::Approx(0.21361471997318388).epsilon(1e-13));
    // uncorrelated columns cost nothing
    CHECK(decov_loss(Tensor::from({2, 2}, {1, 0, 0, 0})).item() == 0.0);
    CHECK(decov_loss(Tensor::from({4, 2}, {1, 1, 1, -1, -1, 1, -1, -1})).item() == doctest::Approx(0.0));
}

TEST_CASE("total loss is the weighted sum in order") {
    LossParts p;
    p.adv = p.content = p.feature = p.ae = p.latent = Tensor::scalar(1.0);
    const LossWeights w{100.0, 1.0, 100.0, 25.0, 1.0};
    CHECK(total_loss_rocgan(p, w).item() == 227.0);
    p.decov = Tensor::scalar(2.0);
    CHECK(total_loss_rocgan(p, w).item() == 229.0);
    LossParts cg;
    cg.adv = Tensor::scalar(0.5);
    cg.content = Tensor::scalar(0.25);
    cg.feature = Tensor::scalar(1.0);
    CHECK(total_loss_rocgan(cg, LossWeights::cgan()).item() == doctest::Approx(0.5 + 25.0 + 1.0));
}

TEST_CASE("loss weights must be non-negative and finite") {
    LossWeights w;
    w.lambda_l = -1.0;
    CHECK_THROWS(w.validate());
    w.lambda_l = std::nan("");
    CHECK_THROWS(w.validate());
}

TEST_CASE("composite objective on a tiny network matches finite differences") {
    // two-layer dense reg pathway and AE pathway sharing the decoder weight
    const Tensor s = random_tensor({4, 3}, 1), y = random_tensor({4, 2}, 2, 2.0, 3.0);
    const Tensor logits_w = random_tensor({2, 1}, 3);
    const auto r = gradcheck(
        [&](const auto& v) {
            const Tensor& enc_g = v[0];
            const Tensor& enc_ae = v[1];
            const Tensor& dec = v[2];
            const Tensor code_g = tanh(matmul(s, enc_g)), code_ae = tanh(matmul(y, enc_ae));
            const Tensor out_g = matmul(code_g, dec), out_ae = matmul(code_ae, dec);
            LossParts p;
            p.adv = adv_loss_g(matmul(out_g, logits_w));
            p.content = content_loss(out_g, y);
            p.feature = feature_matching_loss(tanh(out_g), tanh(y));
            p.ae = ae_loss(y, out_ae);
            p.latent = latent_loss(code_g, code_ae);
            p.decov = decov_loss(code_g);
            return total_loss_rocgan(p, LossWeights{});
        },
        {random_tensor({3, 2}, 4), random_tensor({2, 2}, 5), random_tensor({2, 2}, 6)});
    CHECK(r.max_rel_error <= 1e-5);
}
