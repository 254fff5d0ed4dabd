#include "rocgan/train.hpp"

#include <cmath>
#include <filesystem>

#include "rocgan/errors.hpp"
#include "rocgan/rng.hpp"

namespace rocgan {

const char* to_string(TrainMode m) {
    switch (m) {
        case TrainMode::cgan: return "cgan";
        case TrainMode::rocgan: return "rocgan";
        case TrainMode::rocgan_skip: return "rocgan_skip";
        case TrainMode::aae: return "aae";
    }
    return "?";
}

TrainMode parse_train_mode(const std::string& s) {
    if (s == "cgan") return TrainMode::cgan;
    if (s == "rocgan") return TrainMode::rocgan;
    if (s == "rocgan_skip") return TrainMode::rocgan_skip;
    if (s == "aae") return TrainMode::aae;
    throw ContractError("unknown mode '" + s + "'");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ContractError("learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ContractError("Adam betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) throw ContractError("adam_eps must be > 0");
    if (batch_size < 2) throw ContractError("batch_size must be >= 2 (batch norm)");
    if (clip_norm && !(*clip_norm > 0.0)) throw ContractError("clip_norm must be > 0");
    loss_weights.validate();
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(const std::vector<Tensor>& params, const std::vector<std::span<const double>>& grads, AdamState& state,
               const TrainConfig& config, const std::vector<std::string>& names) {
    if (grads.size() != params.size()) throw ContractError("adam_step: one gradient per parameter required");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.numel(), 0.0);
            state.v.emplace_back(p.numel(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw ContractError("adam_step: state does not match parameters");
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i].numel()) throw ContractError("adam_step: gradient size mismatch");
        for (double g : grads[i]) {
            if (!std::isfinite(g)) {
                const std::string who = i < names.size() ? names[i] : "parameter " + std::to_string(i);
                throw DivergenceError("gradient:" + who, config.seed,
                                      "non-finite gradient in " + who + " at Adam step " +
                                          std::to_string(state.step + 1));
            }
            sq += g * g;
        }
    }
    double scale = 1.0;
    if (config.clip_norm && std::sqrt(sq) > *config.clip_norm) scale = *config.clip_norm / std::sqrt(sq);

    ++state.step;
    const double b1 = config.adam_beta1, b2 = config.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i];
        auto w = p.mutable_data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double g = grads[i][k] * scale;
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            w[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.adam_eps);
        }
    }
}

Adam::Adam(std::vector<Tensor> params, const TrainConfig& config, std::vector<std::string> names)
    : params_(std::move(params)), names_(std::move(names)), config_(config) {}

void Adam::step() {
    std::vector<std::vector<double>> zeros;
    std::vector<std::span<const double>> grads;
    for (const auto& p : params_) {
        if (p.has_grad()) {
            grads.push_back(p.grad());
        } else {
            zeros.emplace_back(p.numel(), 0.0);
            grads.emplace_back();
        }
    }
    // Second pass so the spans into `zeros` stay valid.
    for (std::size_t i = 0, z = 0; i < params_.size(); ++i)
        if (!params_[i].has_grad()) grads[i] = zeros[z++];
    adam_step(params_, grads, state_, config_, names_);
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------

double StepMetrics::term(const std::string& name) const {
    for (const auto& [k, v] : terms)
        if (k == name) return v;
    throw ContractError("step metrics have no term '" + name + "'");
}

bool StepMetrics::has_term(const std::string& name) const {
    for (const auto& [k, v] : terms)
        if (k == name) return true;
    return false;
}

namespace {

std::vector<Tensor> concat(std::vector<Tensor> a, const std::vector<Tensor>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void set_trainable(const std::vector<Tensor>& params, bool on) {
    for (Tensor p : params) p.set_requires_grad(on);
}

}  // namespace

ImageTrainer::ImageTrainer(const GeneratorSpec& gspec, const NetworkSpec& dspec, const TrainConfig& config)
    : config_(config) {
    config_.validate();
    const std::uint64_t seed = config_.seed;
    switch (config_.mode) {
        case TrainMode::cgan: cgan_ = std::make_unique<Pathway>(gspec, store_, "G", seed); break;
        case TrainMode::rocgan:
        case TrainMode::rocgan_skip:
            rocgan_ = std::make_unique<RoCGANGenerator>(gspec, store_, seed, config_.share_decoder);
            break;
        case TrainMode::aae: aae_ = std::make_unique<AdversarialAutoencoder>(gspec, store_, seed); break;
    }
    if (config_.mode == TrainMode::aae) {
        d_params_ = store_.trainable_parameters("Dcode.");
    } else {
        disc_ = std::make_unique<Discriminator>(dspec, gspec.input_shape, store_, seed);
        d_params_ = store_.trainable_parameters("D.");
    }
    g_opt_ = std::make_unique<Adam>(concat(store_.trainable_parameters("enc_"), store_.trainable_parameters("dec_")),
                                    config_);
    d_opt_ = std::make_unique<Adam>(d_params_, config_);
}

void ImageTrainer::check(const char* term, const Tensor& value) const {
    if (!std::isfinite(value.item()))
        throw DivergenceError(term, config_.seed,
                              std::string("non-finite ") + term + " loss at step " + std::to_string(steps_ + 1));
}

Tensor ImageTrainer::generate(const Tensor& s, NormMode mode) const {
    if (cgan_) return (*cgan_)(s, mode);
    if (rocgan_) return rocgan_->forward_reg(s, mode).output;
    return aae_->autoencoder()(s, mode);
}

StepMetrics ImageTrainer::step(const Tensor& s, const Tensor& y, const Tensor& unlabelled) {
    StepMetrics m = config_.mode == TrainMode::aae ? step_aae(y) : step_gan(s, y, unlabelled);
    ++steps_;
    m.step = steps_;
    return m;
}

StepMetrics ImageTrainer::step_gan(const Tensor& s, const Tensor& y, const Tensor& unlabelled) {
    const LossWeights& w = config_.loss_weights;
    StepMetrics metrics;
    metrics.labelled_in_batch = y.dim(0);
    metrics.unlabelled_in_batch = unlabelled.defined() ? unlabelled.dim(0) : 0;

    Pathway::Output reg = cgan_ ? cgan_->forward_with_skips(s, NormMode::train)
                                : rocgan_->forward_reg(s, NormMode::train);

    // Discriminator update on (y real, G(s) fake), both conditioned on s.
    d_opt_->zero_grad();
    {
        const Tensor real = disc_->discriminate(s, y, NormMode::train).logits;
        const Tensor fake = disc_->discriminate(s, reg.output.detach(), NormMode::train).logits;
        const Tensor d_loss = adv_loss_d(real, fake);
        check("d_adv", d_loss);
        d_loss.backward();
        d_opt_->step();
        metrics.d_loss = d_loss.item();
    }

    // Generator update with the discriminator frozen.
    set_trainable(d_params_, false);
    g_opt_->zero_grad();
    LossParts parts;
    Tensor real_features;
    {
        NoGradGuard ng;
        real_features = disc_->discriminate(s, y, NormMode::train).features;
    }
    const auto fake = disc_->discriminate(s, reg.output, NormMode::train);
    parts.adv = adv_loss_g(fake.logits, config_.generator_adversarial);
    parts.content = content_loss(reg.output, y);
    parts.feature = feature_matching_loss(fake.features, real_features);
    if (rocgan_) {
        const auto ae = rocgan_->forward_ae(y, NormMode::train);
        parts.ae = ae_loss(y, ae.output);
        if (unlabelled.defined() && unlabelled.dim(0) > 0) {
            const auto extra = rocgan_->forward_ae(unlabelled, NormMode::train);
            const double nl = static_cast<double>(y.dim(0)), nu = static_cast<double>(unlabelled.dim(0));
            parts.ae = add(mul(parts.ae, nl / (nl + nu)), mul(ae_loss(unlabelled, extra.output), nu / (nl + nu)));
        }
        parts.latent = latent_loss(reg.code, ae.code);
        if (config_.mode == TrainMode::rocgan_skip) parts.decov = add(decov_loss(reg.code), decov_loss(ae.code));
    }
    const std::pair<const char*, const Tensor*> named[] = {{"adv", &parts.adv},         {"content", &parts.content},
                                                           {"feature", &parts.feature}, {"ae", &parts.ae},
                                                           {"latent", &parts.latent},   {"decov", &parts.decov}};
    for (auto [name, t] : named) {
        if (!t->defined()) continue;
        check(name, *t);
        metrics.terms.emplace_back(name, t->item());
    }
    const Tensor total = total_loss_rocgan(parts, w);
    check("total", total);
    total.backward();
    g_opt_->step();
    set_trainable(d_params_, true);
    metrics.g_total = total.item();
    return metrics;
}

StepMetrics ImageTrainer::step_aae(const Tensor& y) {
    StepMetrics metrics;
    metrics.labelled_in_batch = y.dim(0);
    const std::size_t n = y.dim(0), code = aae_->code_size();
    const auto ae = aae_->autoencoder().forward_with_skips(y, NormMode::train);
    const Tensor z_fake = reshape(ae.code, {n, code});

    SplitMix64 rng(derive_seed(derive_seed(config_.seed, "prior"), static_cast<std::uint64_t>(steps_)));
    std::vector<double> prior(n * code);
    for (double& v : prior) v = rng.normal();
    const Tensor z_real = Tensor::from({n, code}, std::move(prior));

    const Network& cd = aae_->code_discriminator();
    d_opt_->zero_grad();
    {
        const Tensor d_loss = adv_loss_d(cd(z_real, NormMode::train), cd(z_fake.detach(), NormMode::train));
        check("d_adv", d_loss);
        d_loss.backward();
        d_opt_->step();
        metrics.d_loss = d_loss.item();
    }
    set_trainable(d_params_, false);
    g_opt_->zero_grad();
    const Tensor adv = adv_loss_g(cd(z_fake, NormMode::train), config_.generator_adversarial);
    const Tensor rec = ae_loss(y, ae.output);
    check("adv", adv);
    check("ae", rec);
    const Tensor total = add(adv, mul(rec, config_.loss_weights.lambda_ae));
    check("total", total);
    total.backward();
    g_opt_->step();
    set_trainable(d_params_, true);
    metrics.terms = {{"adv", adv.item()}, {"ae", rec.item()}};
    metrics.g_total = total.item();
    return metrics;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> batch_rows(std::uint64_t seed, std::size_t step, std::size_t population, std::size_t batch) {
    if (population == 0) throw ContractError("cannot draw a batch from an empty set");
    SplitMix64 rng(derive_seed(derive_seed(seed, "batch"), static_cast<std::uint64_t>(step)));
    std::vector<std::size_t> rows(batch);
    for (auto& r : rows) r = rng.below(population);
    return rows;
}

namespace {

void run_loop(ImageTrainer& trainer, const Tensor& labelled, const Tensor* unlabelled,
              const ImageTrainOptions& options) {
    const TrainConfig& cfg = trainer.config();
    if (labelled.rank() != 4 || labelled.dim(0) == 0) throw ContractError("training needs N x C x H x W images, N > 0");
    CorruptionSpec noise = options.noise;
    noise.seed = derive_seed(cfg.seed, "corruption");
    const std::uint64_t unl_seed = derive_seed(cfg.seed, "unlabelled");
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const Tensor y_unit = gather_batch(labelled, batch_rows(cfg.seed, it, labelled.dim(0), cfg.batch_size));
        const Tensor s = to_signed(corrupt(y_unit, noise, it));
        const Tensor y = to_signed(y_unit);
        Tensor extra;
        if (unlabelled && unlabelled->defined() && unlabelled->dim(0) > 0)
            extra = to_signed(
                gather_batch(*unlabelled, batch_rows(unl_seed, it, unlabelled->dim(0), cfg.batch_size)));
        const StepMetrics m = trainer.step(s, y, extra);
        if (options.on_step) options.on_step(m);
        if (options.checkpoint_every && (it + 1) % options.checkpoint_every == 0 && !options.checkpoint_dir.empty())
            save_checkpoint(trainer.store(),
                            (std::filesystem::path(options.checkpoint_dir) / ("step_" + std::to_string(it + 1))).string());
    }
}

}  // namespace

void train_images(ImageTrainer& trainer, const Tensor& clean, const ImageTrainOptions& options) {
    run_loop(trainer, clean, nullptr, options);
}

void train_semi_supervised(ImageTrainer& trainer, const Tensor& labelled_clean, const Tensor& unlabelled_clean,
                           const ImageTrainOptions& options) {
    if (!labelled_clean.defined() || labelled_clean.dim(0) == 0)
        throw ContractError("semi-supervised training needs a non-empty labelled set");
    if (trainer.config().mode != TrainMode::rocgan && trainer.config().mode != TrainMode::rocgan_skip &&
        unlabelled_clean.defined() && unlabelled_clean.dim(0) > 0)
        throw ContractError("unlabelled targets need an AE pathway (rocgan modes)");
    run_loop(trainer, labelled_clean, &unlabelled_clean, options);
}

}  // namespace rocgan
