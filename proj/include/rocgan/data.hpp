#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rocgan/tensor.hpp"

namespace rocgan {

/// Pixel-drop ("denoising") and black-pixel ("sparse inpainting") corruption.
/// The "x/y" notation is x = 100 * drop_rate, y = 100 * black_rate.
struct CorruptionSpec {
    double drop_rate = 0.0;
    double black_rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::string label() const;  // "25/0"
    static CorruptionSpec parse(const std::string& label, std::uint64_t seed = 0);
};

// The unseen-noise grid evaluated after training on 25/0.
std::vector<CorruptionSpec> robustness_grid();

// img: C x H x W (or N x C x H x W, each sample drawing its own masks) with values
// in [0, 1]. Dropped entries are set to 0. Deterministic in (spec.seed, stream).
Tensor corrupt(const Tensor& img, const CorruptionSpec& spec, std::uint64_t stream = 0);

struct ManifoldSample {
    Tensor inputs;   // n x 3: [x, y, exp(2x)]
    Tensor outputs;  // n x 4: [x + 2y + 4, exp(x) + 1, x + y + 3, x + 2]
    Tensor coords;   // n x 2: (x, y)
};

std::array<double, 3> manifold_input(double x, double y);
std::array<double, 4> manifold_output(double x, double y);
ManifoldSample sample_manifold(std::size_t n, std::uint64_t seed);

/// Latent parameters of one procedural image, all in [0, 1].
struct ImageLatent {
    double pos_x, pos_y, scale, orientation, color_a, color_b;
    std::array<double, 6> as_array() const { return {pos_x, pos_y, scale, orientation, color_a, color_b}; }
    static ImageLatent from_array(const std::array<double, 6>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }
};

// Oriented two-tone gradient background plus an anti-aliased (pixel-integrated)
// Gaussian blob. Returns 3 x side x side in [0, 1].
Tensor render_procedural(const ImageLatent& latent, std::size_t side);

struct ProceduralSet {
    Tensor images;  // n x 3 x side x side
    std::vector<ImageLatent> latents;
};

// side must be 16, 32 or 64.
ProceduralSet gen_procedural_images(std::size_t n, std::size_t side, std::uint64_t seed);

// Writes <dir>/<stem>.tnsr (images, f32), <dir>/<stem>_latents.tnsr and a JSON
// manifest {sample_count, side, seed, images, latent_log}.
void write_dataset(const ProceduralSet& set, std::size_t side, std::uint64_t seed, const std::string& dir,
                   const std::string& stem);

// [0, 1] <-> [-1, 1]
Tensor to_signed(const Tensor& unit);
Tensor to_unit(const Tensor& signed_img);

// Rows [begin, begin + count) of the leading axis.
Tensor slice_batch(const Tensor& t, std::size_t begin, std::size_t count);
Tensor gather_batch(const Tensor& t, const std::vector<std::size_t>& rows);
Tensor stack_batch(const std::vector<Tensor>& rows);

}  // namespace rocgan
