#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "rocgan/errors.hpp"
#include "rocgan/eval.hpp"
#include "rocgan/gradcheck.hpp"

using namespace rocgan;

TEST_CASE("ssim reference values") {
    const Tensor a = test::seq({3, 16, 16}, [](double i) { return 0.5 + 0.4 * std::sin(0.1 * i); });
    const Tensor b = test::seq({3, 16, 16}, [](double i) { return 0.5 + 0.4 * std::cos(0.13 * i); });
    CHECK(ssim(a, b) == doctest::Approx(0.2141784769172674).epsilon(1e-12));
    CHECK(ssim(a, a) == 1.0);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
    const Tensor zero = Tensor::zeros({1, 12, 12}), one = Tensor::full({1, 12, 12}, 1.0);
    CHECK(ssim(zero, one) == doctest::Approx(9.999000099992464e-05).epsilon(1e-12));
}

TEST_CASE("ssim on images smaller than the window") {
    const Tensor a = test::seq({2, 6, 7}, [](double i) { return 0.5 + 0.3 * std::sin(0.7 * i); });
    const Tensor b = test::seq({2, 6, 7}, [](double i) { return 0.5 + 0.3 * std::sin(0.7 * i + 0.4); });
    CHECK(ssim(a, b) == doctest::Approx(0.9218133413769828).epsilon(1e-12));
    CHECK_THROWS(ssim(a, Tensor::zeros({2, 6, 6})));
}

TEST_CASE("ssim is symmetric for random pairs") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Tensor a = random_tensor({3, 16, 16}, s, 0.0, 1.0), b = random_tensor({3, 16, 16}, s + 10, 0.0, 1.0);
        CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
    }
    const Tensor x = random_tensor({2, 3, 16, 16}, 1, 0.0, 1.0), y = random_tensor({2, 3, 16, 16}, 2, 0.0, 1.0);
    const auto per = ssim_batch(x, y);
    REQUIRE(per.size() == 2);
    CHECK(per[1] == ssim(reshape(slice_batch(x, 1, 1), {3, 16, 16}), reshape(slice_batch(y, 1, 1), {3, 16, 16})));
}

TEST_CASE("histograms use 20 equal bins and clamp the ends") {
    const Histogram h = histogram({0.0, 0.05, 0.5, 0.999, 1.0, 1.5, -2.0}, 0.0, 1.0);
    CHECK(h.edges.size() == 21);
    CHECK(h.counts.size() == 20);
    CHECK(h.edges[1] == doctest::Approx(0.05));
    CHECK(h.counts[0] == 2);
    CHECK(h.counts[1] == 1);
    CHECK(h.counts[10] == 1);
    CHECK(h.counts[19] == 3);
    CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == 7);
}

TEST_CASE("eval grid reports one cell per spec and beats the corrupted input") {
    const Tensor clean = gen_procedural_images(6, 16, 3).images;
    // A model that ignores its input and returns the clean targets.
    std::size_t calls = 0;
    const ImageModel oracle = [&](const Tensor& s) {
        ++calls;
        return to_signed(slice_batch(clean, 0, s.dim(0)));
    };
    const auto grid = robustness_grid();
    const EvalReport r = eval_grid(oracle, clean, grid, 1, "oracle", 64);
    REQUIRE(r.cells.size() == grid.size());
    for (const auto& c : r.cells) {
        CHECK(c.ssim == doctest::Approx(1.0));
        CHECK(c.ssim > c.input_ssim);
        CHECK(c.per_sample_ssim.size() == 6);
    }
    CHECK(r.rows().size() >= grid.size());
    CHECK_THROWS(eval_grid(oracle, Tensor(), grid, 1));
}

TEST_CASE("fgsm: sign of the l1 gradient, bounded by epsilon") {
    const ImageModel identity = [](const Tensor& s) { return mul(s, 1.0); };
    const Tensor s = Tensor::from({1, 1, 1, 3}, {0.5, 0.2, -0.1});
    const Tensor y = Tensor::from({1, 1, 1, 3}, {0.0, -0.3, -0.5});
    const Tensor adv = fgsm_attack(identity, s, y, 0.01);
    for (std::size_t i = 0; i < 3; ++i) CHECK(adv[i] == doctest::Approx(s[i] + 0.01).epsilon(1e-15));
    const ImageModel constant = [](const Tensor& x) { return mul(x, 0.0); };
    CHECK(test::max_abs_diff(fgsm_attack(constant, s, y, 0.01), s) == 0.0);
    CHECK_THROWS(fgsm_attack(identity, s, y, 0.0));
}

TEST_CASE("fgsm raises the loss more than a random sign perturbation") {
    const Tensor w = random_tensor({4, 4}, 3);
    const ImageModel model = [&](const Tensor& s) {
        return reshape(tanh(matmul(reshape(s, {s.dim(0) * 4, 4}), w)), s.shape());
    };
    const Tensor s = random_tensor({100, 1, 4, 4}, 1), y = random_tensor({100, 1, 4, 4}, 2);
    const double adv = l1_metric(model(fgsm_attack(model, s, y, 0.01)), y);
    const double rnd = l1_metric(model(random_sign_perturbation(s, 0.01, 7)), y);
    CHECK(adv > rnd);
    CHECK(test::max_abs_diff(fgsm_attack(model, s, y, 0.01), s) <= 0.01 + 1e-15);
}

TEST_CASE("optimal discriminator and the value at the optimum") {
    const DiscreteJointDist d{{"a", "b"}, {0.8, 0.2}, {0.2, 0.8}};
    const auto dstar = optimal_discriminator(d);
    CHECK(dstar[0] == doctest::Approx(0.8));
    CHECK(dstar[1] == doctest::Approx(0.2));
    CHECK(jsd(d.p_d, d.p_g) == doctest::Approx(0.19274475702175753).epsilon(1e-13));
    CHECK(gan_value(d, dstar) == doctest::Approx(-1.0008048470763757).epsilon(1e-13));
    CHECK(gan_value(d, dstar) == doctest::Approx(-std::log(4.0) + 2 * jsd(d.p_d, d.p_g)).epsilon(1e-13));
    const auto grid = grid_search_discriminator(d);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(grid[i] - dstar[i]) <= 2e-3);
}

TEST_CASE("equal distributions reach -log 4 with D* = 1/2") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        DiscreteJointDist d = random_distribution(7, s);
        d.p_g = d.p_d;
        const auto dstar = optimal_discriminator(d);
        for (double v : dstar) CHECK(v == 0.5);
        CHECK(std::abs(gan_value(d, dstar) + std::log(4.0)) <= 1e-12);
        CHECK(jsd(d.p_d, d.p_g) == 0.0);
    }
}

TEST_CASE("jsd is non-negative and the optimum dominates the grid") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const DiscreteJointDist d = random_distribution(5, s);
        d.validate();
        CHECK(jsd(d.p_d, d.p_g) > 0.0);
        CHECK(jsd(d.p_d, d.p_g) <= std::log(2.0));
        const auto dstar = optimal_discriminator(d);
        CHECK(gan_value(d, dstar) >= gan_value(d, grid_search_discriminator(d)) - 1e-12);
    }
}

TEST_CASE("outcomes with no mass are excluded") {
    const DiscreteJointDist d{{"a", "b", "c"}, {0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}};
    const auto dstar = optimal_discriminator(d);
    CHECK(std::isnan(dstar[2]));
    CHECK(gan_value(d, dstar) == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
    const DiscreteJointDist bad{{"a", "b"}, {0.5, 0.6}, {0.5, 0.5}};
    CHECK_THROWS(bad.validate());
}

TEST_CASE("pca eigenvalues match the reference") {
    Eigen::MatrixXd data(6, 3);
    for (int i = 0; i < 18; ++i) data(i / 3, i % 3) = std::sin(0.61 * i) + 0.05 * i;
    const Pca p = pca_fit(data, 3);
    CHECK(p.variances(0) == doctest::Approx(1.2320159783624494).epsilon(1e-12));
    CHECK(p.variances(1) == doctest::Approx(0.43014396521297943).epsilon(1e-12));
    CHECK(p.variances(2) == doctest::Approx(0.0017892457949032).epsilon(1e-9));
    const Eigen::MatrixXd once = pca_apply(pca_fit(data, 2), data);
    CHECK((pca_apply(pca_fit(data, 2), once) - once).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("a line in the plane needs one component") {
    Eigen::MatrixXd line(10, 2);
    for (int i = 0; i < 10; ++i) line.row(i) << i, 2.0 * i + 1.0;
    const Pca p = pca_fit_variance(line, 0.9);
    CHECK(p.components.cols() == 1);
    CHECK(p.retained == doctest::Approx(1.0));
    CHECK((pca_apply(p, line) - line).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK_THROWS(pca_fit(line.topRows(1), 2));
}

TEST_CASE("shared linear decoder keeps regression outputs in its column space") {
    Eigen::MatrixXd data(40, 6);
    for (int i = 0; i < 240; ++i) data(i / 6, i % 6) = std::sin(0.37 * i) + 0.1 * std::cos(1.7 * i);
    const Pca p = pca_fit(data, 2);
    const LinearPathway lp = make_linear_pathway(p, 5, true, 3);
    CHECK(lp.shared());
    const Tensor s = random_tensor({5, 8}, 4);
    CHECK(column_space_residual(lp.u_d, lp.regress(s)) <= 1e-10);
    const LinearPathway free = make_linear_pathway(p, 5, false, 3);
    CHECK_FALSE(free.shared());
}

TEST_CASE("synthetic experiment runs end to end at toy scale") {
    SyntheticConfig c;
    c.max_iterations = c.pretrain_iterations = 300;
    c.patience = 100;
    c.eval_interval = 50;
    c.validation_points = 64;
    c.test_points = 200;
    c.batch_size = 32;
    const SyntheticResult a = run_synthetic_experiment(c), b = run_synthetic_experiment(c);
    CHECK(std::isfinite(a.l1_baseline));
    CHECK(std::isfinite(a.l1_twopathway));
    CHECK(a.l1_baseline == b.l1_baseline);
    CHECK(a.l1_twopathway == b.l1_twopathway);
    c.decoder_init = "neither";
    CHECK_THROWS(run_synthetic_experiment(c));
}
