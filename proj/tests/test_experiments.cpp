#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rocgan/errors.hpp"
#include "rocgan/experiments.hpp"
#include "rocgan/plot.hpp"

using namespace rocgan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string error_field(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<none>";
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rocgan_exp_" + name);
    fs::remove_all(p);
    return p;
}

// A few iterations on 16x16 images, enough to exercise every artifact.
json tiny_image(const std::string& experiment, const fs::path& out) {
    return {{"experiment", experiment},
            {"output_dir", out.string()},
            {"seeds", {0}},
            {"train", {{"iterations", 2}, {"batch_size", 2}, {"log_every", 1}}},
            {"data", {{"side", 16}, {"train_samples", 4}, {"test_samples", 2}}}};
}

}  // namespace

TEST_CASE("config errors name the offending field") {
    CHECK(error_field({{"experiment", "warp_drive"}}) == "experiment");
    CHECK(error_field(json::object()) == "experiment");
    CHECK(error_field({{"experiment", "theory"}, {"seeds", json::array()}}) == "seeds");
    CHECK(error_field({{"experiment", "theory"}, {"seeds", {0, -1}}}) == "seeds[1]");
    CHECK(error_field({{"experiment", "theory"}, {"modes", {"cgan", "vae"}}}) == "modes[1]");
    CHECK(error_field({{"experiment", "theory"}, {"train", {{"batch_size", 1}}}}) == "train.batch_size");
    CHECK(error_field({{"experiment", "theory"}, {"train", {{"learning_rate", 0}}}}) == "train.learning_rate");
    CHECK(error_field({{"experiment", "theory"}, {"train", {{"loss_weights", {{"lambda_l", -1}}}}}}) ==
          "train.loss_weights.lambda_l");
    CHECK(error_field({{"experiment", "theory"}, {"data", {{"side", 20}}}}) == "data.side");
    CHECK(error_field({{"experiment", "theory"}, {"data", {{"manifest", "/nonexistent/m.json"}}}}) == "data.manifest");
    CHECK(error_field({{"experiment", "theory"}, {"noise", {{"eval", {"25/0", "x"}}}}}) == "noise.eval[1]");
    CHECK(error_field({{"experiment", "ablation_lambda"}}) == "ablation");
    CHECK(error_field({{"experiment", "ablation_lambda"}, {"ablation", {{"lambda_q", {1}}}}}) == "ablation.lambda_q");
    CHECK(error_field({{"experiment", "synthetic"}, {"synthetic", {{"decoder_init", "random"}}}}) ==
          "synthetic.decoder_init");
}

TEST_CASE("unknown fields are rejected with their path") {
    CHECK(error_field({{"experiment", "theory"}, {"colour", "red"}}) == "colour");
    CHECK(error_field({{"experiment", "theory"}, {"train", {{"lr", 0.1}}}}) == "train.lr");
}

TEST_CASE("defaults follow the experiment") {
    CHECK(parse_config({{"experiment", "image_denoise"}}).train_noise == "25/0");
    CHECK(parse_config({{"experiment", "image_inpaint"}}).train_noise == "0/50");
    CHECK(parse_config({{"experiment", "robustness_grid"}}).eval_noise.size() == 6);
    const ExperimentConfig c = parse_config({{"experiment", "theory"}});
    CHECK(c.train.learning_rate == 2e-5);
    CHECK(c.train.loss_weights.lambda_l == 25.0);
    CHECK(c.train.loss_weights.lambda_ae == 100.0);
    CHECK(c.train.loss_weights.lambda_decov == 1.0);
}

TEST_CASE("shipped configs parse") {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(ROCGAN_CONFIG_DIR)) {
        if (e.path().extension() != ".json") continue;
        CAPTURE(e.path().string());
        CHECK_NOTHROW(load_config(e.path().string()));
        ++n;
    }
    CHECK(n >= 9);
}

TEST_CASE("the resolved config round trips") {
    const ExperimentConfig c = parse_config(
        {{"experiment", "ablation_lambda"}, {"ablation", {{"lambda_l", {0, 1, 25}}}}, {"seeds", {3, 4}}});
    const json resolved = c.to_json();
    const ExperimentConfig again = parse_config(resolved);
    CHECK(again.to_json() == resolved);
    CHECK(resolved.at("train").at("learning_rate") == 2e-5);
    CHECK(resolved.at("synthetic").contains("pretrain_restarts"));
}

TEST_CASE("theory run reaches -log 4 and is bitwise reproducible") {
    const fs::path a = scratch("theory_a"), b = scratch("theory_b");
    json j = {{"experiment", "theory"}, {"output_dir", a.string()}, {"theory", {{"distributions", 10}}}};
    run_experiment(parse_config(j));
    j["output_dir"] = b.string();
    const auto rows = run_experiment(parse_config(j));
    bool found = false;
    for (const auto& r : rows)
        if (r.grid_label == "p_d=p_g" && r.metric == "value_at_dstar") {
            found = true;
            CHECK(std::abs(r.value + std::log(4.0)) <= 1e-10);
        }
    CHECK(found);
    CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
    CHECK(fs::exists(a / "config.resolved.json"));
    const CsvTable t = read_csv((a / "metrics.csv").string());
    CHECK(t.header == std::vector<std::string>{"experiment_id", "grid_label", "metric", "value", "seed"});
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("ablation rows per seed with the zero-weight run flagged") {
    const fs::path out = scratch("ablation");
    json j = tiny_image("ablation_lambda", out);
    j["ablation"] = {{"lambda_l", {0, 25}}};
    const auto rows = run_experiment(parse_config(j));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].grid_label == "lambda_l=0;ablation");
    CHECK(rows[1].grid_label == "lambda_l=25");
    CHECK(rows[1].metric == "ssim");
    fs::remove_all(out);
}

TEST_CASE("image runs write metrics, step logs, checkpoints and plots") {
    const fs::path out = scratch("denoise");
    json j = tiny_image("image_denoise", out);
    j["train"]["checkpoint_every"] = 1;
    const auto rows = run_experiment(parse_config(j));
    CHECK_FALSE(rows.empty());
    CHECK(fs::exists(out / "metrics.csv"));
    bool svg = false, steps = false;
    for (const auto& e : fs::recursive_directory_iterator(out)) {
        svg |= e.path().extension() == ".svg";
        steps |= e.path().filename().string().rfind("steps_", 0) == 0;
    }
    CHECK(svg);
    CHECK(steps);
    CHECK(fs::exists(out / "checkpoints" / "rocgan_seed0" / "manifest.json"));
    CHECK(fs::exists(out / "checkpoints" / "rocgan_seed0_steps" / "step_2" / "manifest.json"));
    fs::remove_all(out);
}

TEST_CASE("synthetic run reports both models per seed") {
    const fs::path out = scratch("synthetic");
    const json j = {{"experiment", "synthetic"},
                    {"output_dir", out.string()},
                    {"seeds", {0, 1}},
                    {"synthetic",
                     {{"max_iterations", 200},
                      {"pretrain_iterations", 200},
                      {"patience", 100},
                      {"eval_interval", 50},
                      {"validation_points", 64},
                      {"test_points", 100}}}};
    const auto rows = run_experiment(parse_config(j));
    int base = 0, two = 0;
    for (const auto& r : rows) {
        base += r.metric == "l1_baseline";
        two += r.metric == "l1_twopathway";
    }
    CHECK(base == 2);
    CHECK(two == 2);
    fs::remove_all(out);
}
