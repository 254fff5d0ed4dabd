#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "helpers.hpp"
#include "rocgan/data.hpp"
#include "rocgan/errors.hpp"
#include "rocgan/gradcheck.hpp"
#include "rocgan/train.hpp"

using namespace rocgan;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config(TrainMode mode, std::uint64_t seed = 3) {
    TrainConfig c;
    c.mode = mode;
    c.seed = seed;
    c.batch_size = 4;
    c.iterations = 3;
    c.learning_rate = 1e-3;
    return c;
}

GeneratorSpec tiny_generator(bool skip = false) {
    return image_generator_spec(Architecture::four_layer, 16, 3, 0.125, skip);
}

Tensor tiny_images(std::size_t n = 12) { return gen_procedural_images(n, 16, 5).images; }

bool same_parameters(const ParameterStore& a, const ParameterStore& b, const std::string& prefix) {
    for (const auto& name : a.names()) {
        if (name.rfind(prefix, 0) != 0) continue;
        if (!b.contains(name) || test::max_abs_diff(a.get(name), b.get(name)) != 0.0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("one Adam step moves each weight by about the learning rate") {
    TrainConfig c;
    c.learning_rate = 0.1;
    Tensor w = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    const Tensor loss = sum(mul(w, Tensor::from({3}, {5.0, -0.01, 3.0})));
    loss.backward();
    Adam opt({w}, c);
    opt.step();
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-1.9).epsilon(1e-5));
    CHECK(w[2] == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(opt.state().step == 1);
}

TEST_CASE("a non-finite gradient raises before any parameter changes") {
    TrainConfig c;
    c.seed = 17;
    Tensor a = Tensor::from({1}, {1.0}), b = Tensor::from({2}, {2.0, 3.0});
    const std::vector<double> ga{0.5}, gb{1.0, std::numeric_limits<double>::quiet_NaN()};
    AdamState st;
    try {
        adam_step({a, b}, {ga, gb}, st, c, {"a", "b"});
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.seed() == 17);
        CHECK(e.term() == "gradient:b");
    }
    CHECK(a[0] == 1.0);
    CHECK(b[0] == 2.0);
    CHECK(st.step == 0);
}

TEST_CASE("global norm clipping bounds the first step") {
    TrainConfig c;
    c.learning_rate = 1.0;
    c.clip_norm = 1.0;
    Tensor a = Tensor::from({2}, {0.0, 0.0});
    AdamState st;
    const std::vector<double> g{30.0, 40.0};
    adam_step({a}, {g}, st, c);
    // Adam normalizes per element, so clipping only rescales m and v together
    CHECK(a[0] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 1;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = TrainConfig{};
    c.adam_beta1 = 1.0;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = TrainConfig{};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ContractError);
    CHECK(TrainConfig{}.learning_rate == 2e-5);
    CHECK(parse_train_mode("rocgan_skip") == TrainMode::rocgan_skip);
    CHECK_THROWS(parse_train_mode("pix2pix"));
}

TEST_CASE("batch rows are reproducible and in range") {
    const auto a = batch_rows(9, 4, 10, 64), b = batch_rows(9, 4, 10, 64), c = batch_rows(9, 5, 10, 64);
    CHECK(a == b);
    CHECK(a != c);
    for (auto r : a) CHECK(r < 10);
    CHECK_THROWS(batch_rows(9, 0, 0, 4));
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    const Tensor imgs = tiny_images();
    ImageTrainOptions opt;
    opt.noise = CorruptionSpec::parse("25/0");
    ImageTrainer a(tiny_generator(), discriminator_spec(0.125), tiny_config(TrainMode::rocgan));
    ImageTrainer b(tiny_generator(), discriminator_spec(0.125), tiny_config(TrainMode::rocgan));
    train_images(a, imgs, opt);
    train_images(b, imgs, opt);
    CHECK(a.steps_taken() == 3);
    CHECK(same_parameters(a.store(), b.store(), ""));
    ImageTrainer c(tiny_generator(), discriminator_spec(0.125), tiny_config(TrainMode::rocgan, 4));
    train_images(c, imgs, opt);
    CHECK_FALSE(same_parameters(a.store(), c.store(), "enc_G"));
}

TEST_CASE("rocgan with zero pathway weights and untied decoders trains exactly like the cgan") {
    const Tensor imgs = tiny_images();
    ImageTrainOptions opt;
    opt.noise = CorruptionSpec::parse("25/0");
    TrainConfig rc = tiny_config(TrainMode::rocgan);
    rc.loss_weights.lambda_ae = rc.loss_weights.lambda_l = rc.loss_weights.lambda_decov = 0.0;
    rc.share_decoder = false;
    ImageTrainer cg(tiny_generator(), discriminator_spec(0.125), tiny_config(TrainMode::cgan));
    ImageTrainer rg(tiny_generator(), discriminator_spec(0.125), rc);
    train_images(cg, imgs, opt);
    train_images(rg, imgs, opt);
    CHECK(same_parameters(cg.store(), rg.store(), "enc_G."));
    CHECK(same_parameters(cg.store(), rg.store(), "dec_G."));
    CHECK(same_parameters(cg.store(), rg.store(), "D."));
}

TEST_CASE("step metrics list the active terms") {
    const Tensor imgs = tiny_images();
    const Tensor s = to_signed(slice_batch(imgs, 0, 4));
    ImageTrainer cg(tiny_generator(), discriminator_spec(0.125), tiny_config(TrainMode::cgan));
    const StepMetrics m = cg.step(s, s);
    CHECK(m.has_term("adv"));
    CHECK_FALSE(m.has_term("ae"));
    CHECK(m.d_loss > 0.0);
    CHECK(m.d_loss <= 4 * std::log(2.0));
    ImageTrainer sk(tiny_generator(true), discriminator_spec(0.125), tiny_config(TrainMode::rocgan_skip));
    const StepMetrics k = sk.step(s, s);
    for (const char* t : {"adv", "content", "feature", "ae", "latent", "decov"}) CHECK(k.has_term(t));
    CHECK_THROWS(k.term("nope"));
    // discriminator parameters are trainable again after the generator step
    for (const auto& p : sk.store().trainable_parameters("D.")) CHECK(p.requires_grad());
}

TEST_CASE("semi-supervised batches carry labelled and unlabelled targets") {
    const Tensor imgs = tiny_images(16);
    const Tensor labelled = slice_batch(imgs, 0, 6), unlabelled = slice_batch(imgs, 6, 10);
    std::vector<StepMetrics> log;
    ImageTrainOptions opt;
    opt.on_step = [&](const StepMetrics& m) { log.push_back(m); };
    ImageTrainer t(tiny_generator(), discriminator_spec(0.125), tiny_config(TrainMode::rocgan));
    train_semi_supervised(t, labelled, unlabelled, opt);
    REQUIRE(log.size() == 3);
    for (const auto& m : log) {
        CHECK(m.labelled_in_batch == 4);
        CHECK(m.unlabelled_in_batch == 4);
    }
    ImageTrainer cg(tiny_generator(), discriminator_spec(0.125), tiny_config(TrainMode::cgan));
    CHECK_THROWS_AS(train_semi_supervised(cg, labelled, unlabelled, opt), ContractError);
}

TEST_CASE("the adversarial autoencoder reduces its reconstruction error") {
    const Tensor imgs = tiny_images(16);
    TrainConfig c = tiny_config(TrainMode::aae);
    c.iterations = 60;
    std::vector<StepMetrics> log;
    ImageTrainOptions opt;
    opt.on_step = [&](const StepMetrics& m) { log.push_back(m); };
    ImageTrainer t(tiny_generator(), discriminator_spec(0.125), c);
    train_images(t, imgs, opt);
    CHECK(log.back().term("ae") < log.front().term("ae"));
    CHECK(t.store().contains("Dcode.l0.weight"));
    CHECK_FALSE(t.store().contains("D.l0.weight"));
}

TEST_CASE("periodic checkpoints") {
    const fs::path dir = fs::temp_directory_path() / "rocgan_train_ckpt";
    fs::remove_all(dir);
    TrainConfig c = tiny_config(TrainMode::cgan);
    c.iterations = 4;
    ImageTrainOptions opt;
    opt.checkpoint_every = 2;
    opt.checkpoint_dir = dir.string();
    ImageTrainer t(tiny_generator(), discriminator_spec(0.125), c);
    train_images(t, tiny_images(), opt);
    CHECK(fs::exists(dir / "step_2" / "manifest.json"));
    CHECK(fs::exists(dir / "step_4" / "manifest.json"));
    CHECK_FALSE(fs::exists(dir / "step_3"));
    fs::remove_all(dir);
}
