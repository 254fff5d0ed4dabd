#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "helpers.hpp"
#include "rocgan/data.hpp"
#include "rocgan/errors.hpp"
#include "rocgan/gradcheck.hpp"
#include "rocgan/tensor_io.hpp"

using namespace rocgan;
namespace fs = std::filesystem;

TEST_CASE("manifold maps at the reference points") {
    const auto in0 = manifold_input(0, 0);
    const auto out0 = manifold_output(0, 0);
    CHECK(in0 == std::array<double, 3>{0, 0, 1});
    CHECK(out0 == std::array<double, 4>{4, 2, 3, 2});
    const auto in1 = manifold_input(1, -1);
    const auto out1 = manifold_output(1, -1);
    CHECK(in1[2] == doctest::Approx(std::exp(2.0)));
    CHECK(out1[0] == 3.0);
    CHECK(out1[1] == doctest::Approx(std::exp(1.0) + 1));
    CHECK(out1[2] == 3.0);
    CHECK(out1[3] == 3.0);
}

TEST_CASE("manifold samples cover the square and satisfy the output identity") {
    const ManifoldSample m = sample_manifold(6400, 11);
    CHECK(m.inputs.shape() == Shape{6400, 3});
    CHECK(m.outputs.shape() == Shape{6400, 4});
    double lo_x = 1, hi_x = -1, lo_y = 1, hi_y = -1;
    for (std::size_t i = 0; i < 6400; ++i) {
        const double x = m.inputs[i * 3], y = m.inputs[i * 3 + 1];
        lo_x = std::min(lo_x, x), hi_x = std::max(hi_x, x);
        lo_y = std::min(lo_y, y), hi_y = std::max(hi_y, y);
        const double d = m.outputs[i * 4] - m.outputs[i * 4 + 2];
        CHECK(d == doctest::Approx(y + 1).epsilon(1e-12));
        CHECK(m.coords[i * 2] == x);
    }
    CHECK(lo_x < -0.99);
    CHECK(hi_x > 0.99);
    CHECK(lo_y < -0.99);
    CHECK(hi_y > 0.99);
    CHECK(test::max_abs_diff(sample_manifold(5, 11).inputs, slice_batch(m.inputs, 0, 5)) == 0.0);
}

TEST_CASE("corruption labels") {
    const auto s = CorruptionSpec::parse("25/10");
    CHECK(s.drop_rate == 0.25);
    CHECK(s.black_rate == 0.10);
    CHECK(s.label() == "25/10");
    CHECK(CorruptionSpec::parse("0/75").label() == "0/75");
    CHECK_THROWS(CorruptionSpec::parse("25"));
    CHECK_THROWS(CorruptionSpec::parse("120/0"));
    CHECK_THROWS(CorruptionSpec::parse("a/b"));
    std::vector<std::string> grid;
    for (const auto& g : robustness_grid()) grid.push_back(g.label());
    CHECK(grid == std::vector<std::string>{"25/0", "35/0", "50/0", "25/10", "25/20", "25/25"});
}

TEST_CASE("identity and full drop") {
    const Tensor img = gen_procedural_images(1, 16, 1).images;
    CHECK(test::max_abs_diff(corrupt(img, CorruptionSpec{}), img) == 0.0);
    const Tensor dropped = corrupt(img, CorruptionSpec::parse("100/0"));
    for (double v : dropped.data()) CHECK(v == 0.0);
}

TEST_CASE("per-channel drop counts follow Binomial(4096, 0.25)") {
    const Tensor img = Tensor::full({3, 64, 64}, 0.5);
    int outliers = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Tensor c = corrupt(img, CorruptionSpec::parse("25/0", seed));
        for (std::size_t ch = 0; ch < 3; ++ch) {
            std::size_t zeros = 0;
            for (std::size_t i = 0; i < 4096; ++i) zeros += c[ch * 4096 + i] == 0.0;
            outliers += std::abs(static_cast<double>(zeros) - 1024.0) > 3 * std::sqrt(4096 * 0.25 * 0.75);
        }
    }
    CHECK(outliers <= 1);
}

TEST_CASE("drop masks differ across channels, black pixels span all channels") {
    const Tensor img = Tensor::full({3, 32, 32}, 0.5);
    const Tensor d = corrupt(img, CorruptionSpec::parse("50/0", 3));
    std::size_t differing = 0;
    for (std::size_t i = 0; i < 1024; ++i) differing += (d[i] == 0.0) != (d[1024 + i] == 0.0);
    CHECK(differing > 300);
    const Tensor b = corrupt(img, CorruptionSpec::parse("0/50", 3));
    std::size_t black = 0;
    for (std::size_t i = 0; i < 1024; ++i) {
        const bool z = b[i] == 0.0;
        black += z;
        CHECK((b[1024 + i] == 0.0) == z);
        CHECK((b[2048 + i] == 0.0) == z);
    }
    CHECK(black > 400);
    CHECK(black < 624);
}

TEST_CASE("corruption is deterministic and black masking is idempotent") {
    const Tensor img = gen_procedural_images(2, 16, 4).images;
    const auto spec = CorruptionSpec::parse("25/20", 8);
    const Tensor a = corrupt(img, spec, 3), b = corrupt(img, spec, 3), c = corrupt(img, spec, 4);
    CHECK(test::max_abs_diff(a, b) == 0.0);
    CHECK(test::max_abs_diff(a, c) > 0.0);
    // samples in a batch draw their own masks
    const Tensor one = reshape(slice_batch(img, 0, 1), {3, 16, 16});
    const Tensor pair = corrupt(stack_batch({one, one}), spec);
    CHECK(test::max_abs_diff(slice_batch(pair, 0, 1), slice_batch(pair, 1, 1)) > 0.0);
    const auto black = CorruptionSpec::parse("0/30", 2);
    const Tensor once = corrupt(img, black);
    CHECK(test::max_abs_diff(corrupt(once, black), once) == 0.0);
}

TEST_CASE("procedural images are deterministic and in range") {
    const ProceduralSet a = gen_procedural_images(4, 32, 9), b = gen_procedural_images(4, 32, 9);
    CHECK(a.images.shape() == Shape{4, 3, 32, 32});
    CHECK(test::max_abs_diff(a.images, b.images) == 0.0);
    for (double v : a.images.data()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(test::max_abs_diff(a.images, gen_procedural_images(4, 32, 10).images) > 0.0);
    CHECK_THROWS(gen_procedural_images(2, 24, 1));
    CHECK(test::max_abs_diff(slice_batch(a.images, 0, 1), reshape(render_procedural(a.latents[0], 32), {1, 3, 32, 32})) ==
          0.0);
}

TEST_CASE("rendering responds smoothly to each latent") {
    const ImageLatent base{0.4, 0.6, 0.5, 0.3, 0.2, 0.7};
    const Tensor ref = render_procedural(base, 32);
    for (std::size_t k = 0; k < 6; ++k) {
        double change[2];
        int j = 0;
        for (double delta : {1e-3, 1e-2}) {
            auto arr = base.as_array();
            arr[k] += delta;
            const Tensor img = render_procedural(ImageLatent::from_array(arr), 32);
            double l1 = 0.0;
            for (std::size_t i = 0; i < img.numel(); ++i) l1 += std::abs(img[i] - ref[i]);
            change[j++] = l1;
        }
        CAPTURE(k);
        CHECK(change[0] > 0.0);
        CHECK(change[1] > change[0]);
        // close to linear at these step sizes
        CHECK(change[1] / change[0] == doctest::Approx(10.0).epsilon(0.5));
    }
}

TEST_CASE("signed range conversion") {
    const Tensor u = Tensor::from({3}, {0.0, 0.5, 1.0});
    const Tensor s = to_signed(u);
    CHECK(s[0] == -1.0);
    CHECK(s[1] == 0.0);
    CHECK(s[2] == 1.0);
    CHECK(test::max_abs_diff(to_unit(s), u) == 0.0);
}

TEST_CASE("TNSR header layout for an f32 2x3 tensor") {
    const auto bytes = encode_tensor(random_tensor({2, 3}, 1), DType::f32);
    const std::uint8_t header[] = {0x54, 0x4E, 0x53, 0x52, 0x01, 0x01, 0x02, 0x00,
                                   0x02, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00};
    REQUIRE(bytes.size() == 16 + 6 * 4);
    CHECK(std::memcmp(bytes.data(), header, 16) == 0);
}

TEST_CASE("TNSR round trips") {
    const Tensor t = random_tensor({2, 3}, 5);
    const Tensor back = decode_tensor(encode_tensor(t));
    CHECK(back.shape() == t.shape());
    CHECK(std::memcmp(back.data().data(), t.data().data(), 6 * sizeof(double)) == 0);
    const Tensor f = decode_tensor(encode_tensor(t, DType::f32));
    for (std::size_t i = 0; i < 6; ++i) CHECK(f[i] == static_cast<double>(static_cast<float>(t[i])));
    const auto scalar = encode_tensor(Tensor::scalar(2.5));
    CHECK(scalar.size() == 8 + 8);
    CHECK(scalar[6] == 0);
    CHECK(decode_tensor(scalar).rank() == 0);
    CHECK(decode_tensor(scalar).item() == 2.5);

    const fs::path p = fs::temp_directory_path() / "rocgan_roundtrip.tnsr";
    write_tensor(p.string(), t);
    CHECK(test::max_abs_diff(read_tensor(p.string()), t) == 0.0);
    fs::remove(p);
}

TEST_CASE("malformed TNSR data is a format error") {
    auto good = encode_tensor(random_tensor({2, 3}, 5));
    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_tensor(bad_magic), FormatError);
    auto bad_version = good;
    bad_version[4] = 2;
    CHECK_THROWS_AS(decode_tensor(bad_version), FormatError);
    auto bad_dtype = good;
    bad_dtype[5] = 3;
    CHECK_THROWS_AS(decode_tensor(bad_dtype), FormatError);
    auto truncated = good;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_tensor(truncated), FormatError);
    CHECK_THROWS_AS(decode_tensor(std::span<const std::uint8_t>(good.data(), 10)), FormatError);
    CHECK_THROWS_AS(read_tensor("/nonexistent/x.tnsr"), FormatError);
}

TEST_CASE("dataset manifest lists count, side, seed and file names") {
    const fs::path dir = fs::temp_directory_path() / "rocgan_dataset_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const ProceduralSet set = gen_procedural_images(3, 16, 2);
    write_dataset(set, 16, 2, dir.string(), "train");
    std::ifstream f(dir / "train_manifest.json");
    REQUIRE(f);
    const auto j = nlohmann::json::parse(f);
    CHECK(j.at("sample_count") == 3);
    CHECK(j.at("side") == 16);
    CHECK(j.at("seed") == 2);
    const Tensor imgs = read_tensor((dir / j.at("images").get<std::string>()).string());
    CHECK(imgs.shape() == Shape{3, 3, 16, 16});
    const Tensor lat = read_tensor((dir / j.at("latent_log").get<std::string>()).string());
    CHECK(lat.shape() == Shape{3, 6});
    CHECK(lat[0] == doctest::Approx(set.latents[0].pos_x).epsilon(1e-6));
    fs::remove_all(dir);
}

TEST_CASE("batch helpers") {
    const Tensor t = test::seq({4, 2}, [](double i) { return i; });
    CHECK(test::max_abs_diff(slice_batch(t, 1, 2), Tensor::from({2, 2}, {2, 3, 4, 5})) == 0.0);
    CHECK(test::max_abs_diff(gather_batch(t, {3, 0}), Tensor::from({2, 2}, {6, 7, 0, 1})) == 0.0);
    CHECK_THROWS(slice_batch(t, 3, 2));
}
