#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rocgan/eval.hpp"
#include "rocgan/train.hpp"

namespace rocgan {

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"synthetic",       "image_denoise", "image_inpaint",
                                                   "robustness_grid", "fgsm",          "theory",
                                                   "linear_analogy",  "ablation_lambda", "semi_supervised"};
    return names;
}

struct ImageDataConfig {
    std::string architecture = "4layer";
    std::size_t side = 32;
    double channel_scale = 0.125;
    std::size_t train_samples = 2000;
    std::size_t test_samples = 200;
    std::string manifest;  // optional dataset manifest to train on instead of generating
};

struct FgsmConfig {
    double epsilon = 0.01;
    std::size_t samples = 100;
};

struct TheoryConfig {
    std::size_t distributions = 100;
    std::size_t support = 8;
    double grid_step = 1e-3;
};

struct LinearAnalogyConfig {
    std::size_t samples = 600;
    std::size_t side = 16;
    std::size_t dim = 0;  // 0: smallest dimension keeping 90% of the variance
    std::size_t holdout = 50;
    std::string noise = "25/0";
};

struct ExperimentConfig {
    std::string experiment;
    std::string output_dir = "out";
    std::vector<std::uint64_t> seeds{0};
    std::vector<TrainMode> modes{TrainMode::cgan, TrainMode::rocgan};
    TrainConfig train;
    std::size_t log_every = 10;
    std::size_t checkpoint_every = 0;
    ImageDataConfig data;
    std::string train_noise;                // defaults per experiment
    std::vector<std::string> eval_noise;    // defaults per experiment
    SyntheticConfig synthetic;
    FgsmConfig fgsm;
    TheoryConfig theory;
    LinearAnalogyConfig linear_analogy;
    std::map<std::string, std::vector<double>> ablation;  // loss weight name -> sweep
    SemiSupervised semi_supervised{200, 800};

    nlohmann::json to_json() const;  // every field, defaults materialized
};

// Throws ConfigError with a dotted field path ("train.batch_size", "seeds[1]").
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Shared by the experiments and the acceptance suite.
struct ImageSetup {
    GeneratorSpec generator;
    NetworkSpec discriminator;
    Tensor train_images;  // [0, 1]
    Tensor test_images;   // [0, 1]
};

ImageSetup make_image_setup(const ImageDataConfig& data, TrainMode mode, std::uint64_t seed);

struct TrainedModel {
    std::unique_ptr<ImageTrainer> trainer;
    std::vector<StepMetrics> log;  // every `log_every` steps
    ImageModel model() const;      // eval-mode regression output
};

TrainedModel train_image_model(const ImageSetup& setup, TrainMode mode, const TrainConfig& base, std::uint64_t seed,
                               const CorruptionSpec& noise, std::size_t log_every = 10,
                               const Tensor& unlabelled = {}, std::size_t checkpoint_every = 0,
                               const std::string& checkpoint_dir = "");

void write_steps_csv(const std::vector<StepMetrics>& log, const std::string& path);

// Runs every seed (up to ROCGAN_LAB_THREADS in parallel), writing metrics.csv,
// per-seed step logs, checkpoints, histogram CSVs, SVG plots and
// config.resolved.json into config.output_dir. Returns the metric rows.
std::vector<EvalRow> run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

std::size_t worker_threads();  // ROCGAN_LAB_THREADS, default 1

}  // namespace rocgan
