#include "rocgan/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "rocgan/errors.hpp"
#include "rocgan/rng.hpp"
#include "rocgan/tensor_io.hpp"

namespace rocgan {

void CorruptionSpec::validate() const {
    if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw ContractError("drop_rate must be in [0, 1]");
    if (!(black_rate >= 0.0 && black_rate <= 1.0)) throw ContractError("black_rate must be in [0, 1]");
}

std::string CorruptionSpec::label() const {
    std::ostringstream os;
    os << std::llround(drop_rate * 100.0) << '/' << std::llround(black_rate * 100.0);
    return os.str();
}

CorruptionSpec CorruptionSpec::parse(const std::string& label, std::uint64_t seed) {
    const auto slash = label.find('/');
    if (slash == std::string::npos) throw ContractError("noise label must look like x/y, got '" + label + "'");
    CorruptionSpec s;
    try {
        s.drop_rate = std::stod(label.substr(0, slash)) / 100.0;
        s.black_rate = std::stod(label.substr(slash + 1)) / 100.0;
    } catch (const std::exception&) {
        throw ContractError("noise label must look like x/y, got '" + label + "'");
    }
    s.seed = seed;
    s.validate();
    return s;
}

std::vector<CorruptionSpec> robustness_grid() {
    std::vector<CorruptionSpec> grid;
    for (const char* l : {"25/0", "35/0", "50/0", "25/10", "25/20", "25/25"}) grid.push_back(CorruptionSpec::parse(l));
    return grid;
}

namespace {

void corrupt_one(double* img, std::size_t c, std::size_t hw, const CorruptionSpec& spec, std::uint64_t seed) {
    if (spec.drop_rate > 0.0) {
        SplitMix64 rng(derive_seed(seed, "drop"));
        for (std::size_t i = 0; i < c * hw; ++i)
            if (rng.bernoulli(spec.drop_rate)) img[i] = 0.0;
    }
    if (spec.black_rate > 0.0) {
        SplitMix64 rng(derive_seed(seed, "black"));
        for (std::size_t p = 0; p < hw; ++p)
            if (rng.bernoulli(spec.black_rate))
                for (std::size_t ch = 0; ch < c; ++ch) img[ch * hw + p] = 0.0;
    }
}

}  // namespace

Tensor corrupt(const Tensor& img, const CorruptionSpec& spec, std::uint64_t stream) {
    spec.validate();
    Tensor out = img.detach();
    auto d = out.mutable_data();
    const std::uint64_t base = derive_seed(spec.seed, stream);
    if (img.rank() == 3) {
        corrupt_one(d.data(), img.dim(0), img.dim(1) * img.dim(2), spec, base);
    } else if (img.rank() == 4) {
        const std::size_t per = img.numel() / img.dim(0);
        for (std::size_t i = 0; i < img.dim(0); ++i)
            corrupt_one(d.data() + i * per, img.dim(1), img.dim(2) * img.dim(3), spec, derive_seed(base, i));
    } else {
        throw ContractError("corrupt expects C x H x W or N x C x H x W, got " + shape_str(img.shape()));
    }
    return out;
}

std::array<double, 3> manifold_input(double x, double y) { return {x, y, std::exp(2.0 * x)}; }

std::array<double, 4> manifold_output(double x, double y) {
    return {x + 2.0 * y + 4.0, std::exp(x) + 1.0, x + y + 3.0, x + 2.0};
}

ManifoldSample sample_manifold(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ContractError("sample_manifold needs n >= 1");
    SplitMix64 rng(derive_seed(seed, "manifold"));
    std::vector<double> in(n * 3), out(n * 4), xy(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        const double y = rng.uniform(-1.0, 1.0);
        const auto a = manifold_input(x, y);
        const auto b = manifold_output(x, y);
        std::copy(a.begin(), a.end(), in.begin() + 3 * i);
        std::copy(b.begin(), b.end(), out.begin() + 4 * i);
        xy[2 * i] = x;
        xy[2 * i + 1] = y;
    }
    return {Tensor::from({n, 3}, std::move(in)), Tensor::from({n, 4}, std::move(out)),
            Tensor::from({n, 2}, std::move(xy))};
}

// ---------------------------------------------------------------------------
// Procedural images

namespace {

std::array<double, 3> palette(double c) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return {0.5 + 0.5 * std::cos(two_pi * c), 0.5 + 0.5 * std::cos(two_pi * (c + 1.0 / 3.0)),
            0.5 + 0.5 * std::cos(two_pi * (c + 2.0 / 3.0))};
}

// Mean of exp(-(u - c)^2 / (2 s^2)) over [lo, hi].
double gaussian_cell_mean(double lo, double hi, double c, double s) {
    const double k = 1.0 / (s * std::numbers::sqrt2);
    return s * std::sqrt(std::numbers::pi / 2.0) * (std::erf((hi - c) * k) - std::erf((lo - c) * k)) / (hi - lo);
}

}  // namespace

Tensor render_procedural(const ImageLatent& z, std::size_t side) {
    const double theta = std::numbers::pi * z.orientation;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cx = 0.2 + 0.6 * z.pos_x, cy = 0.2 + 0.6 * z.pos_y;
    const double sigma = 0.06 + 0.14 * z.scale;
    const auto ca = palette(z.color_a);
    const auto cb = palette(z.color_b);
    const double cell = 1.0 / static_cast<double>(side);
    std::vector<double> gx(side), gy(side);
    for (std::size_t i = 0; i < side; ++i) {
        gx[i] = gaussian_cell_mean(i * cell, (i + 1) * cell, cx, sigma);
        gy[i] = gaussian_cell_mean(i * cell, (i + 1) * cell, cy, sigma);
    }
    std::vector<double> img(3 * side * side);
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            const double u = (c + 0.5) * cell - 0.5, v = (r + 0.5) * cell - 0.5;
            const double t = (u * ct + v * st) / std::numbers::sqrt2 + 0.5;
            const double alpha = 0.9 * gx[c] * gy[r];
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double bg = ca[ch] * (0.25 + 0.5 * t);
                img[(ch * side + r) * side + c] = std::clamp(bg * (1.0 - alpha) + cb[ch] * alpha, 0.0, 1.0);
            }
        }
    return Tensor::from({3, side, side}, std::move(img));
}

ProceduralSet gen_procedural_images(std::size_t n, std::size_t side, std::uint64_t seed) {
    if (side != 16 && side != 32 && side != 64) throw ContractError("procedural image side must be 16, 32 or 64");
    ProceduralSet set;
    std::vector<double> all;
    all.reserve(n * 3 * side * side);
    for (std::size_t i = 0; i < n; ++i) {
        SplitMix64 rng(derive_seed(derive_seed(seed, "procedural"), i));
        ImageLatent z{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        Tensor img = render_procedural(z, side);
        all.insert(all.end(), img.data().begin(), img.data().end());
        set.latents.push_back(z);
    }
    set.images = Tensor::from({n, 3, side, side}, std::move(all));
    return set;
}

void write_dataset(const ProceduralSet& set, std::size_t side, std::uint64_t seed, const std::string& dir,
                   const std::string& stem) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::size_t n = set.latents.size();
    std::vector<double> lat;
    for (const auto& z : set.latents) {
        const auto a = z.as_array();
        lat.insert(lat.end(), a.begin(), a.end());
    }
    write_tensor((fs::path(dir) / (stem + ".tnsr")).string(), set.images, DType::f32);
    write_tensor((fs::path(dir) / (stem + "_latents.tnsr")).string(), Tensor::from({n, 6}, std::move(lat)));
    nlohmann::json m = {{"sample_count", n},
                        {"side", side},
                        {"seed", seed},
                        {"images", stem + ".tnsr"},
                        {"latent_log", stem + "_latents.tnsr"},
                        {"latent_fields", {"pos_x", "pos_y", "scale", "orientation", "color_a", "color_b"}}};
    std::ofstream(fs::path(dir) / (stem + "_manifest.json")) << m.dump(2) << '\n';
}

Tensor to_signed(const Tensor& unit) { return add(mul(unit, 2.0), -1.0); }
Tensor to_unit(const Tensor& signed_img) { return mul(add(signed_img, 1.0), 0.5); }

Tensor slice_batch(const Tensor& t, std::size_t begin, std::size_t count) {
    if (begin + count > t.dim(0) || count == 0) throw ContractError("slice_batch out of range");
    const std::size_t per = t.numel() / t.dim(0);
    Shape s = t.shape();
    s[0] = count;
    return Tensor::from(s, std::vector<double>(t.data().begin() + begin * per, t.data().begin() + (begin + count) * per));
}

Tensor gather_batch(const Tensor& t, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw ContractError("gather_batch needs at least one row");
    const std::size_t per = t.numel() / t.dim(0);
    std::vector<double> out;
    out.reserve(rows.size() * per);
    for (auto r : rows) {
        if (r >= t.dim(0)) throw ContractError("gather_batch row out of range");
        out.insert(out.end(), t.data().begin() + r * per, t.data().begin() + (r + 1) * per);
    }
    Shape s = t.shape();
    s[0] = rows.size();
    return Tensor::from(s, std::move(out));
}

Tensor stack_batch(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ContractError("stack_batch needs at least one tensor");
    std::vector<double> out;
    for (const auto& r : rows) {
        if (r.shape() != rows[0].shape()) throw ContractError("stack_batch shape mismatch");
        out.insert(out.end(), r.data().begin(), r.data().end());
    }
    Shape s{rows.size()};
    s.insert(s.end(), rows[0].shape().begin(), rows[0].shape().end());
    return Tensor::from(s, std::move(out));
}

}  // namespace rocgan
