#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rocgan/data.hpp"
#include "rocgan/losses.hpp"
#include "rocgan/models.hpp"

namespace rocgan {

enum class TrainMode { cgan, rocgan, rocgan_skip, aae };

const char* to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct SemiSupervised {
    std::size_t labelled_count = 0;
    std::size_t unlabelled_count = 0;
};

struct TrainConfig {
    double learning_rate = 2e-5;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 64;
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;
    LossWeights loss_weights;
    TrainMode mode = TrainMode::rocgan;
    std::optional<SemiSupervised> semi_supervised;
    std::optional<double> clip_norm;  // global-norm clip, off by default
    GeneratorAdversarial generator_adversarial = GeneratorAdversarial::non_saturating;
    // Only for reduction checks: rocgan mode with two independent decoders.
    bool share_decoder = true;

    void validate() const;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;
};

// One bias-corrected Adam update of every parameter from `grads` (same order
// and sizes). A non-finite gradient throws DivergenceError before anything is
// modified; `names` (optional) labels the offending parameter.
void adam_step(const std::vector<Tensor>& params, const std::vector<std::span<const double>>& grads, AdamState& state,
               const TrainConfig& config, const std::vector<std::string>& names = {});

/// Adam over a fixed parameter list, reading the parameters' own gradients.
class Adam {
public:
    Adam(std::vector<Tensor> params, const TrainConfig& config, std::vector<std::string> names = {});

    void step();
    void zero_grad();
    const std::vector<Tensor>& parameters() const { return params_; }
    const AdamState& state() const { return state_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::string> names_;
    TrainConfig config_;
    AdamState state_;
};

/// Logged values of one training step. `terms` are the unweighted generator
/// loss parts in summation order; `g_total` is their weighted sum.
struct StepMetrics {
    std::size_t step = 0;
    double d_loss = 0.0;
    double g_total = 0.0;
    std::vector<std::pair<std::string, double>> terms;
    std::size_t labelled_in_batch = 0;
    std::size_t unlabelled_in_batch = 0;

    double term(const std::string& name) const;
    bool has_term(const std::string& name) const;
};

/// Generator, discriminator(s) and optimizers for one training mode.
class ImageTrainer {
public:
    ImageTrainer(const GeneratorSpec& gspec, const NetworkSpec& dspec, const TrainConfig& config);

    // s, y: N x C x H x W in [-1, 1]. `unlabelled` (optional) are extra target
    // samples consumed only by the AE reconstruction term.
    StepMetrics step(const Tensor& s, const Tensor& y, const Tensor& unlabelled = {});

    // Regression output; for the AAE this is the autoencoder.
    Tensor generate(const Tensor& s, NormMode mode = NormMode::eval) const;

    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }
    const TrainConfig& config() const { return config_; }
    const RoCGANGenerator* rocgan() const { return rocgan_.get(); }
    const Pathway* cgan() const { return cgan_.get(); }
    std::size_t steps_taken() const { return steps_; }

private:
    StepMetrics step_gan(const Tensor& s, const Tensor& y, const Tensor& unlabelled);
    StepMetrics step_aae(const Tensor& y);
    void check(const char* term, const Tensor& value) const;

    TrainConfig config_;
    ParameterStore store_;
    std::unique_ptr<Pathway> cgan_;
    std::unique_ptr<RoCGANGenerator> rocgan_;
    std::unique_ptr<AdversarialAutoencoder> aae_;
    std::unique_ptr<Discriminator> disc_;
    std::vector<Tensor> d_params_;
    std::unique_ptr<Adam> g_opt_;
    std::unique_ptr<Adam> d_opt_;
    std::size_t steps_ = 0;
};

struct ImageTrainOptions {
    CorruptionSpec noise;                  // applied on the fly to each batch
    std::size_t checkpoint_every = 0;      // 0 disables
    std::string checkpoint_dir;
    std::function<void(const StepMetrics&)> on_step;
};

// Trains on clean images in [0, 1] (N x 3 x H x W). Batches and corruption
// masks are drawn from streams derived from config.seed.
void train_images(ImageTrainer& trainer, const Tensor& clean, const ImageTrainOptions& options);

// Labelled pairs drive every reg-pathway term; unlabelled targets join the AE
// reconstruction term only.
void train_semi_supervised(ImageTrainer& trainer, const Tensor& labelled_clean, const Tensor& unlabelled_clean,
                           const ImageTrainOptions& options);

// Rows of a batch for step `step`, sampled with replacement.
std::vector<std::size_t> batch_rows(std::uint64_t seed, std::size_t step, std::size_t population, std::size_t batch);

}  // namespace rocgan
