#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rocgan/data.hpp"
#include "rocgan/train.hpp"

namespace rocgan {

// ---------------------------------------------------------------------------
// Image metrics

struct SsimOptions {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

// Mean local SSIM over valid windows, averaged over channels. a, b: C x H x W
// (or H x W) with values in [0, 1]. Images smaller than the window use a
// window truncated to the image.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt = {});
// Per-sample SSIM of two N x C x H x W batches.
std::vector<double> ssim_batch(const Tensor& a, const Tensor& b, const SsimOptions& opt = {});
// Mean absolute error per pixel.
double l1_metric(const Tensor& a, const Tensor& b);

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<std::size_t> counts;
};

// Equal-width bins over [lo, hi]; values outside are clamped to the end bins.
Histogram histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins = 20);

// ---------------------------------------------------------------------------
// Reports

struct EvalRow {
    std::string experiment_id;
    std::string grid_label;
    std::string metric;
    double value = 0.0;
    std::uint64_t seed = 0;
};

struct GridCell {
    std::string label;
    double ssim = 0.0;        // mean SSIM of outputs vs clean targets
    double l1 = 0.0;          // mean per-pixel l1 of outputs vs targets
    double input_ssim = 0.0;  // corrupted inputs vs targets
    std::vector<double> per_sample_ssim;
    Histogram ssim_histogram;
};

struct EvalReport {
    std::string experiment_id;
    std::uint64_t seed = 0;
    std::vector<GridCell> cells;  // one per grid spec

    std::vector<EvalRow> rows() const;
};

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path);
void write_histogram_csv(const Histogram& h, const std::string& path);

// Maps a batch of [-1, 1] inputs to [-1, 1] outputs; must be differentiable
// in its input for FGSM.
using ImageModel = std::function<Tensor(const Tensor&)>;

// Runs `model` on corrupted copies of `clean` (N x C x H x W in [0, 1]) for every
// grid spec. `batch` bounds the forward batch size.
EvalReport eval_grid(const ImageModel& model, const Tensor& clean, const std::vector<CorruptionSpec>& grid,
                     std::uint64_t seed, const std::string& experiment_id = "eval", std::size_t batch = 64);

// ---------------------------------------------------------------------------
// Adversarial examples

// s + epsilon * sign(grad_s l1(model(s), y)), with s, y in the model's range.
Tensor fgsm_attack(const ImageModel& model, const Tensor& s, const Tensor& y, double epsilon);
// s + epsilon * r with r uniform in {-1, +1}.
Tensor random_sign_perturbation(const Tensor& s, double epsilon, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Theory on finite supports

struct DiscreteJointDist {
    std::vector<std::string> support;
    std::vector<double> p_d;
    std::vector<double> p_g;

    void validate() const;
};

// D*(o) = p_d / (p_d + p_g); outcomes with p_d = p_g = 0 are excluded (NaN).
std::vector<double> optimal_discriminator(const DiscreteJointDist& dist);
// sum p_d log D + p_g log(1 - D) over outcomes with p_d + p_g > 0.
double gan_value(const DiscreteJointDist& dist, const std::vector<double>& d);
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);
double jsd(const std::vector<double>& p, const std::vector<double>& q);
// Maximizer of gan_value over the grid {step, 2 step, ..., 1 - step} per outcome.
std::vector<double> grid_search_discriminator(const DiscreteJointDist& dist, double step = 1e-3);
// Random distribution pair over n outcomes (Dirichlet(1) via exponentials).
DiscreteJointDist random_distribution(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Linear analogy

struct Pca {
    Eigen::VectorXd mean;        // d
    Eigen::MatrixXd components;  // d x k, orthonormal columns
    Eigen::VectorXd variances;   // k, descending
    double retained = 0.0;       // retained variance fraction
};

// Fixed dimension, or the smallest dimension retaining `variance_fraction`.
Pca pca_fit(const Eigen::MatrixXd& data, std::size_t dim);
Pca pca_fit_variance(const Eigen::MatrixXd& data, double variance_fraction);
Eigen::MatrixXd pca_project(const Pca& p, const Eigen::MatrixXd& data);        // n x k
Eigen::MatrixXd pca_reconstruct(const Pca& p, const Eigen::MatrixXd& coords);  // n x d
// reconstruct(project(x)), the orthogonal projection onto the affine subspace.
Eigen::MatrixXd pca_apply(const Pca& p, const Eigen::MatrixXd& data);

/// Linear encoder-decoder pair per pathway: y_hat = U_D U_E y, y_tilde = U_D(G) U_E(G) s.
struct LinearPathway {
    Tensor u_e;    // k x d_y
    Tensor u_d;    // d_y x k
    Tensor u_e_g;  // k x d_s
    Tensor u_d_g;  // d_y x k; same storage as u_d when shared

    Tensor reconstruct(const Tensor& y) const;  // columns are samples
    Tensor regress(const Tensor& s) const;
    bool shared() const { return u_d.same_storage(u_d_g); }
};

LinearPathway make_linear_pathway(const Pca& target_pca, std::size_t source_dim, bool share, std::uint64_t seed);

// Max |r| of r = Y - U (U^T U)^-1 U^T Y.
double column_space_residual(const Tensor& u, const Tensor& y);

struct LinearAnalogyReport {
    std::size_t dim = 0;
    double retained_variance = 0.0;
    double idempotence_error = 0.0;  // max |P(P x) - P x|
    double reg_residual = 0.0;       // shared pathway outputs vs decoder column space
    double d_ambient = 0.0;          // mean ||x - x_tilde||
    double d_subspace = 0.0;         // mean ||P x - P x_tilde||
};

// data: n x d clean samples (rows). Fits PCA (fixed `dim`, or the 90% variance
// rule when dim = 0) on the first n - holdout rows and corrupts the held-out rows.
LinearAnalogyReport linear_analogy_demo(const Eigen::MatrixXd& data, std::size_t dim, const CorruptionSpec& noise,
                                        std::size_t channels, std::size_t side, std::size_t holdout = 50);

Eigen::MatrixXd to_matrix(const Tensor& t);  // N x ... -> N x rest
Tensor from_matrix(const Eigen::MatrixXd& m);

// ---------------------------------------------------------------------------
// Synthetic manifold experiment

struct SyntheticConfig {
    std::uint64_t seed = 0;
    std::size_t hidden = 16;
    std::size_t code = 2;
    double init_std = 0.3;
    double bias_init = 0.5;
    double learning_rate = 1e-3;
    double joint_learning_rate = 1e-4;
    std::size_t batch_size = 128;
    std::size_t max_iterations = 100000;
    std::size_t pretrain_iterations = 100000;
    std::size_t pretrain_restarts = 1;  // best validated of this many initializations
    std::size_t patience = 5000;
    double min_improvement = 1e-6;
    std::size_t validation_points = 1024;
    std::size_t eval_interval = 100;
    std::size_t test_points = 6400;
    double lambda_latent = 1.0;
    bool share_decoder = true;
    // Pretrained weights for the shared decoder: "autoencoder" or "baseline".
    std::string decoder_init = "autoencoder";
    // Reg-encoder-only phase before the joint phase; 0 disables.
    std::size_t alignment_iterations = 0;
};

struct SyntheticResult {
    double l1_baseline = 0.0;    // total l1 over test points and outputs
    double l1_twopathway = 0.0;
    double l1_autoencoder = 0.0;  // AE pathway of the two-pathway model
    double l1_pretrained_autoencoder = 0.0;
    std::size_t baseline_iterations = 0;
    std::size_t ae_iterations = 0;
    std::size_t alignment_iterations = 0;
    std::size_t joint_iterations = 0;
    Tensor test_coords;          // n x 2
    Tensor test_targets;         // n x 4
    Tensor baseline_outputs;     // n x 4
    Tensor twopathway_outputs;   // n x 4
};

SyntheticResult run_synthetic_experiment(const SyntheticConfig& config);

}  // namespace rocgan
