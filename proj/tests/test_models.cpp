#include <doctest.h>

#include "helpers.hpp"
#include "rocgan/errors.hpp"
#include "rocgan/gradcheck.hpp"
#include "rocgan/models.hpp"

using namespace rocgan;

TEST_CASE("4layer generator reaches a 1x1x512 bottleneck on 64x64 inputs") {
    const GeneratorSpec g = image_generator_spec(Architecture::four_layer, 64);
    ParameterStore store;
    Pathway p(g, store, "G", 1);
    CHECK(p.encoder().output_shape() == Shape{512, 1, 1});
    CHECK(p.decoder().output_shape() == Shape{3, 64, 64});
}

TEST_CASE("channel scale 1/8 gives a 64-channel bottleneck and keeps image channels") {
    const GeneratorSpec g = image_generator_spec(Architecture::four_layer, 64, 3, 0.125);
    ParameterStore store;
    Pathway p(g, store, "G", 1);
    CHECK(p.encoder().output_shape() == Shape{64, 1, 1});
    const Tensor y = p(random_tensor({2, 3, 64, 64}, 3), NormMode::train);
    CHECK(y.shape() == Shape{2, 3, 64, 64});
    for (double v : y.data()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("deeper generators round trip the input size") {
    for (Architecture a : {Architecture::five_layer, Architecture::six_layer}) {
        for (std::size_t side : {32, 64}) {
            const GeneratorSpec g = image_generator_spec(a, side, 3, 0.125);
            ParameterStore store;
            Pathway p(g, store, "G", 1);
            CHECK(p.decoder().output_shape() == Shape{3, side, side});
        }
    }
    CHECK(parse_architecture(to_string(Architecture::six_layer)) == Architecture::six_layer);
    CHECK_THROWS(parse_architecture("7layer"));
}

TEST_CASE("discriminator maps a 64x64 pair to a 13x13 logit map") {
    ParameterStore store;
    Discriminator d(discriminator_spec(), {3, 64, 64}, store, 1);
    CHECK(d.network().input_shape() == Shape{6, 64, 64});
    CHECK(d.network().output_shape() == Shape{1, 13, 13});
}

TEST_CASE("discriminator features are the penultimate activations") {
    ParameterStore store;
    Discriminator d(discriminator_spec(0.125), {3, 32, 32}, store, 1);
    const Tensor s = random_tensor({2, 3, 32, 32}, 1), c = random_tensor({2, 3, 32, 32}, 2);
    const auto out = d.discriminate(s, c, NormMode::train);
    CHECK(out.features.shape().at(1) == 32);
    CHECK(out.logits.shape().at(1) == 1);
    CHECK_THROWS_AS(d.discriminate(s, random_tensor({2, 3, 16, 16}, 3), NormMode::train), ContractError);
}

TEST_CASE("skip variant concatenates the third encoder output into the second decoder layer") {
    const GeneratorSpec plain = image_generator_spec(Architecture::four_layer, 64);
    const GeneratorSpec skip = image_generator_spec(Architecture::four_layer, 64, 3, 1.0, true);
    REQUIRE(skip.lateral.size() == 1);
    CHECK(skip.lateral[0] == std::pair<std::size_t, std::size_t>{2, 1});
    ParameterStore a, b;
    Pathway pa(plain, a, "G", 1), pb(skip, b, "G", 1);
    const Shape wa = a.get("dec_G.l1.weight").shape(), wb = b.get("dec_G.l1.weight").shape();
    CHECK(wb.at(0) == 2 * wa.at(0));
    CHECK_THROWS(image_generator_spec(Architecture::five_layer, 64, 3, 1.0, true));
}

TEST_CASE("without shortcuts the pathway equals the plain stacks") {
    const GeneratorSpec g = image_generator_spec(Architecture::four_layer, 32, 3, 0.125);
    ParameterStore store;
    Pathway p(g, store, "G", 5);
    const Tensor x = random_tensor({2, 3, 32, 32}, 9);
    const auto out = p.forward_with_skips(x, NormMode::eval);
    const Tensor direct = p.decoder()(p.encoder()(x, NormMode::eval), NormMode::eval);
    CHECK(test::max_abs_diff(out.output, direct) == 0.0);
    CHECK(out.encoder_taps.count("bottleneck") == 1);
}

TEST_CASE("the two pathways share every decoder tensor") {
    const GeneratorSpec g = image_generator_spec(Architecture::four_layer, 32, 3, 0.125);
    ParameterStore store;
    RoCGANGenerator gen(g, store, 1);
    const auto reg = gen.reg().decoder().parameter_names(), ae = gen.ae().decoder().parameter_names();
    REQUIRE(reg.size() == ae.size());
    for (std::size_t i = 0; i < reg.size(); ++i) CHECK(store.get(reg[i]).same_storage(store.get(ae[i])));
    CHECK_FALSE(store.get("enc_G.l0.weight").same_storage(store.get("enc_AE.l0.weight")));
    // writing through one name is visible through the other
    Tensor alias = store.get("dec_AE.l3.bias");
    alias.mutable_data()[0] = 42.0;
    CHECK(store.get("dec_G.l3.bias")[0] == 42.0);

    ParameterStore untied;
    RoCGANGenerator two(g, untied, 1, false);
    CHECK_FALSE(untied.get("dec_G.l0.weight").same_storage(untied.get("dec_AE.l0.weight")));
    CHECK(untied.parameter_count() > 0);
    CHECK(untied.trainable_parameters().size() > store.trainable_parameters().size());
}

TEST_CASE("gradients of the ae loss reach the shared decoder from both pathways") {
    const GeneratorSpec g = mlp_generator_spec(3, 2, 3, 4, 0.5, 0.1);
    ParameterStore store;
    RoCGANGenerator gen(g, store, 2);
    const Tensor s = random_tensor({4, 3}, 1), y = random_tensor({4, 3}, 2);
    sum(gen.forward_ae(y, NormMode::train).output).backward();
    double norm = 0.0;
    for (double v : store.get("dec_G.l1.weight").grad()) norm += v * v;
    CHECK(norm > 0.0);
    CHECK_FALSE(store.get("enc_G.l0.weight").has_grad());
}

TEST_CASE("mlp generator layout") {
    const GeneratorSpec g = mlp_generator_spec(2, 2, 4, 16, 0.3, 0.5);
    ParameterStore store;
    Pathway p(g, store, "base", 1);
    CHECK(p.encoder().output_shape() == Shape{2});
    CHECK(p.decoder().output_shape() == Shape{4});
    for (double b : store.get("enc_base.l0.bias").data()) CHECK(b == 0.5);
}

TEST_CASE("adversarial autoencoder code discriminator sees the flattened bottleneck") {
    const GeneratorSpec g = image_generator_spec(Architecture::four_layer, 32, 3, 0.125);
    ParameterStore store;
    AdversarialAutoencoder aae = build_aae_reference(g, store, 1);
    CHECK(aae.code_size() == 64);
    CHECK(aae.code_discriminator().input_shape() == Shape{64});
    CHECK(aae.code_discriminator().output_shape() == Shape{1});
}
