#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "helpers.hpp"
#include "rocgan/errors.hpp"
#include "rocgan/gradcheck.hpp"
#include "rocgan/nn.hpp"

using namespace rocgan;
namespace fs = std::filesystem;

namespace {

NetworkSpec small_conv() {
    NetworkSpec s;
    s.layers = {LayerSpec::conv(4, 8, 2, false), LayerSpec::conv(4, 16, 2, true)};
    return s;
}

}  // namespace

TEST_CASE("network output shapes follow the strides") {
    ParameterStore store;
    Network net(small_conv(), {3, 16, 16}, store, "n", 1);
    CHECK(net.output_shape() == Shape{16, 4, 4});
    const Tensor y = net(random_tensor({2, 3, 16, 16}, 1), NormMode::train);
    CHECK(y.shape() == Shape{2, 16, 4, 4});
}

TEST_CASE("layers with batch norm carry no bias") {
    ParameterStore store;
    Network net(small_conv(), {3, 16, 16}, store, "n", 1);
    CHECK(store.contains("n.l0.bias"));
    CHECK_FALSE(store.contains("n.l1.bias"));
    CHECK(store.contains("n.l1.bn.gamma"));
    CHECK(store.contains("n.l1.bn.running_mean"));
}

TEST_CASE("channel scale shrinks hidden layers") {
    NetworkSpec s = small_conv();
    s.channel_scale = 0.125;
    ParameterStore store;
    Network net(s, {3, 16, 16}, store, "n", 1);
    CHECK(net.output_shape() == Shape{2, 4, 4});
}

TEST_CASE("initialization is deterministic per parameter name") {
    ParameterStore a, b;
    Network na(small_conv(), {3, 16, 16}, a, "n", 7);
    Network nb(small_conv(), {3, 16, 16}, b, "n", 7);
    for (const auto& name : a.names()) CHECK(test::max_abs_diff(a.get(name), b.get(name)) == 0.0);
    ParameterStore c;
    Network nc(small_conv(), {3, 16, 16}, c, "n", 8);
    CHECK(test::max_abs_diff(a.get("n.l0.weight"), c.get("n.l0.weight")) > 0.0);
}

TEST_CASE("shared parameters are one storage with one gradient") {
    ParameterStore store;
    store.add("a.w", Tensor::from({2}, {1.0, 2.0}, true));
    store.add("b.w", Tensor::from({2}, {5.0, 6.0}, true));
    share_parameters(store, {"a.w", "b.w"});
    CHECK(store.get("a.w").same_storage(store.get("b.w")));
    CHECK(store.trainable_parameters().size() == 1);
    CHECK(store.parameter_count() == 2);
    sum(add(store.get("a.w"), store.get("b.w"))).backward();
    CHECK(store.get("b.w").grad()[0] == 2.0);
    CHECK_THROWS_AS(store.add("a.w", Tensor::zeros({2})), ContractError);
}

TEST_CASE("checkpoints store one file per storage and restore sharing") {
    ParameterStore store;
    store.add("enc.w", random_tensor({3, 2}, 1), true);
    store.add("dec_G.w", random_tensor({2, 2}, 2), true);
    store.add("dec_AE.w", random_tensor({2, 2}, 3), true);
    share_parameters(store, {"dec_G.w", "dec_AE.w"});
    const std::string dir = (fs::temp_directory_path() / "rocgan_ckpt_test").string();
    fs::remove_all(dir);
    save_checkpoint(store, dir);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir)) files += e.path().extension() == ".tnsr";
    CHECK(files == 2);

    ParameterStore fresh;
    fresh.add("enc.w", Tensor::zeros({3, 2}), true);
    fresh.add("dec_G.w", Tensor::zeros({2, 2}), true);
    fresh.add("dec_AE.w", Tensor::zeros({2, 2}), true);
    load_checkpoint(fresh, dir);
    CHECK(fresh.get("dec_G.w").same_storage(fresh.get("dec_AE.w")));
    CHECK(test::max_abs_diff(fresh.get("enc.w"), store.get("enc.w")) == 0.0);
    CHECK(test::max_abs_diff(fresh.get("dec_AE.w"), store.get("dec_G.w")) == 0.0);
    fs::remove_all(dir);
}

TEST_CASE("network gradient through conv, activation and batch norm") {
    ParameterStore store;
    NetworkSpec s = small_conv();
    s.init_std = 0.3;
    Network net(s, {2, 8, 8}, store, "n", 3);
    const Tensor x = random_tensor({3, 2, 8, 8}, 4);
    const auto params = store.trainable_parameters();
    const auto r = gradcheck(
        [&](const std::vector<Tensor>& v) { return random_projection(net(v[0], NormMode::train), 5); }, {x});
    CHECK(r.max_rel_error < 1e-5);
    CHECK(params.size() == 5);
}
