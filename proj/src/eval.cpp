#include "rocgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "rocgan/errors.hpp"
#include "rocgan/rng.hpp"

namespace rocgan {

// ---------------------------------------------------------------------------
// SSIM

namespace {

std::vector<double> gaussian_window(std::size_t n, double sigma) {
    std::vector<double> w(n);
    const double c = (static_cast<double>(n) - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(i) - c;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

// Valid-mode separable filter of an H x W map.
std::vector<double> filter_valid(const std::vector<double>& x, std::size_t h, std::size_t w,
                                 const std::vector<double>& gh, const std::vector<double>& gw) {
    const std::size_t oh = h - gh.size() + 1, ow = w - gw.size() + 1;
    std::vector<double> tmp(h * ow, 0.0), out(oh * ow, 0.0);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < gw.size(); ++k) s += gw[k] * x[r * w + c + k];
            tmp[r * ow + c] = s;
        }
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < gh.size(); ++k) s += gh[k] * tmp[(r + k) * ow + c];
            out[r * ow + c] = s;
        }
    return out;
}

double ssim_plane(const double* a, const double* b, std::size_t h, std::size_t w, const SsimOptions& opt) {
    const auto gh = gaussian_window(std::min(opt.window, h), opt.sigma);
    const auto gw = gaussian_window(std::min(opt.window, w), opt.sigma);
    const std::size_t n = h * w;
    std::vector<double> va(a, a + n), vb(b, b + n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto ma = filter_valid(va, h, w, gh, gw), mb = filter_valid(vb, h, w, gh, gw);
    const auto saa = filter_valid(aa, h, w, gh, gw), sbb = filter_valid(bb, h, w, gh, gw);
    const auto sab = filter_valid(ab, h, w, gh, gw);
    const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
    const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
    double total = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double mab = ma[i] * mb[i];
        const double var_a = saa[i] - ma[i] * ma[i];
        const double var_b = sbb[i] - mb[i] * mb[i];
        const double cov = sab[i] - mab;
        total += ((2.0 * mab + c1) * (2.0 * cov + c2)) /
                 ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (var_a + var_b + c2));
    }
    return total / static_cast<double>(ma.size());
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt) {
    if (a.shape() != b.shape())
        throw ContractError("ssim: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    if (a.rank() != 2 && a.rank() != 3) throw ContractError("ssim expects H x W or C x H x W");
    const std::size_t c = a.rank() == 3 ? a.dim(0) : 1;
    const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
    if (h == 0 || w == 0) throw ContractError("ssim of an empty image");
    double total = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch)
        total += ssim_plane(a.data().data() + ch * h * w, b.data().data() + ch * h * w, h, w, opt);
    return total / static_cast<double>(c);
}

std::vector<double> ssim_batch(const Tensor& a, const Tensor& b, const SsimOptions& opt) {
    if (a.shape() != b.shape() || a.rank() != 4) throw ContractError("ssim_batch expects two equal N x C x H x W batches");
    std::vector<double> out;
    const Shape one(a.shape().begin() + 1, a.shape().end());
    for (std::size_t i = 0; i < a.dim(0); ++i)
        out.push_back(ssim(reshape(slice_batch(a, i, 1), one), reshape(slice_batch(b, i, 1), one), opt));
    return out;
}

double l1_metric(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ContractError("l1_metric: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.numel());
}

Histogram histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins) {
    if (!(hi > lo) || bins == 0) throw ContractError("histogram needs hi > lo and bins > 0");
    Histogram h;
    h.counts.assign(bins, 0);
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * static_cast<double>(i) / bins);
    for (double v : values) {
        const double f = (v - lo) / (hi - lo) * static_cast<double>(bins);
        const auto k = static_cast<std::size_t>(std::clamp(std::floor(f), 0.0, static_cast<double>(bins - 1)));
        ++h.counts[k];
    }
    return h;
}

// ---------------------------------------------------------------------------
// Reports

std::vector<EvalRow> EvalReport::rows() const {
    std::vector<EvalRow> out;
    for (const auto& c : cells) {
        out.push_back({experiment_id, c.label, "ssim", c.ssim, seed});
        out.push_back({experiment_id, c.label, "l1", c.l1, seed});
        out.push_back({experiment_id, c.label, "input_ssim", c.input_ssim, seed});
    }
    return out;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write " + path);
    f << "experiment_id,grid_label,metric,value,seed\n";
    for (const auto& r : rows)
        f << r.experiment_id << ',' << r.grid_label << ',' << r.metric << ',' << fmt(r.value) << ',' << r.seed << '\n';
}

void write_histogram_csv(const Histogram& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write " + path);
    f << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        f << fmt(h.edges[i]) << ',' << fmt(h.edges[i + 1]) << ',' << h.counts[i] << '\n';
}

EvalReport eval_grid(const ImageModel& model, const Tensor& clean, const std::vector<CorruptionSpec>& grid,
                     std::uint64_t seed, const std::string& experiment_id, std::size_t batch) {
    if (!clean.defined() || clean.rank() != 4 || clean.dim(0) == 0) throw ContractError("eval_grid: empty dataset");
    if (batch == 0) throw ContractError("eval_grid: batch must be > 0");
    EvalReport report;
    report.experiment_id = experiment_id;
    report.seed = seed;
    NoGradGuard ng;
    for (CorruptionSpec spec : grid) {
        spec.seed = derive_seed(seed, "eval/" + spec.label());
        const Tensor noisy = corrupt(clean, spec);
        GridCell cell;
        cell.label = spec.label();
        double l1_sum = 0.0;
        std::vector<double> in_ssim;
        for (std::size_t b = 0; b < clean.dim(0); b += batch) {
            const std::size_t n = std::min(batch, clean.dim(0) - b);
            const Tensor y = slice_batch(clean, b, n);
            const Tensor x = slice_batch(noisy, b, n);
            const Tensor out = to_unit(model(to_signed(x)));
            const auto s = ssim_batch(out, y);
            cell.per_sample_ssim.insert(cell.per_sample_ssim.end(), s.begin(), s.end());
            const auto si = ssim_batch(x, y);
            in_ssim.insert(in_ssim.end(), si.begin(), si.end());
            l1_sum += l1_metric(out, y) * static_cast<double>(n);
        }
        const double count = static_cast<double>(clean.dim(0));
        cell.ssim = std::accumulate(cell.per_sample_ssim.begin(), cell.per_sample_ssim.end(), 0.0) / count;
        cell.input_ssim = std::accumulate(in_ssim.begin(), in_ssim.end(), 0.0) / count;
        cell.l1 = l1_sum / count;
        const double lo = std::min(0.0, *std::min_element(cell.per_sample_ssim.begin(), cell.per_sample_ssim.end()));
        cell.ssim_histogram = histogram(cell.per_sample_ssim, lo, 1.0, 20);
        report.cells.push_back(std::move(cell));
    }
    return report;
}

// ---------------------------------------------------------------------------
// FGSM

Tensor fgsm_attack(const ImageModel& model, const Tensor& s, const Tensor& y, double epsilon) {
    if (!(epsilon > 0.0)) throw ContractError("fgsm epsilon must be > 0");
    Tensor x = s.detach().clone();
    x.set_requires_grad(true);
    const Tensor loss = l1_mean(model(x), y);
    loss.backward();
    std::vector<double> adv(s.data().begin(), s.data().end());
    const auto g = x.grad();
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += epsilon * static_cast<double>((g[i] > 0.0) - (g[i] < 0.0));
    return Tensor::from(s.shape(), std::move(adv));
}

Tensor random_sign_perturbation(const Tensor& s, double epsilon, std::uint64_t seed) {
    SplitMix64 rng(derive_seed(seed, "random_sign"));
    std::vector<double> out(s.data().begin(), s.data().end());
    for (double& v : out) v += rng.bernoulli(0.5) ? epsilon : -epsilon;
    return Tensor::from(s.shape(), std::move(out));
}

// ---------------------------------------------------------------------------
// Theory

void DiscreteJointDist::validate() const {
    if (p_d.size() != p_g.size() || p_d.empty()) throw ContractError("p_d and p_g must have equal, non-zero length");
    if (!support.empty() && support.size() != p_d.size()) throw ContractError("support size mismatch");
    for (const auto* p : {&p_d, &p_g}) {
        double s = 0.0;
        for (double v : *p) {
            if (!(v >= 0.0)) throw DomainError("probabilities must be non-negative");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12) throw DomainError("probabilities must sum to 1");
    }
}

std::vector<double> optimal_discriminator(const DiscreteJointDist& dist) {
    dist.validate();
    std::vector<double> d(dist.p_d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double t = dist.p_d[i] + dist.p_g[i];
        d[i] = t > 0.0 ? dist.p_d[i] / t : std::numeric_limits<double>::quiet_NaN();
    }
    return d;
}

double gan_value(const DiscreteJointDist& dist, const std::vector<double>& d) {
    dist.validate();
    if (d.size() != dist.p_d.size()) throw ContractError("gan_value: one D value per outcome required");
    double v = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (dist.p_d[i] + dist.p_g[i] == 0.0) continue;
        if (dist.p_d[i] > 0.0) {
            if (!(d[i] > 0.0)) throw DomainError("gan_value: D must be > 0 where p_d > 0");
            v += dist.p_d[i] * std::log(d[i]);
        }
        if (dist.p_g[i] > 0.0) {
            if (!(d[i] < 1.0)) throw DomainError("gan_value: D must be < 1 where p_g > 0");
            v += dist.p_g[i] * std::log1p(-d[i]);
        }
    }
    return v;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ContractError("kl_divergence: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
        s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

double jsd(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ContractError("jsd: size mismatch");
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m);
}

std::vector<double> grid_search_discriminator(const DiscreteJointDist& dist, double step) {
    dist.validate();
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / step));
    std::vector<double> best(dist.p_d.size(), std::numeric_limits<double>::quiet_NaN());
    // The value is a sum of per-outcome terms, so each outcome is maximized alone.
    for (std::size_t i = 0; i < best.size(); ++i) {
        if (dist.p_d[i] + dist.p_g[i] == 0.0) continue;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < steps; ++k) {
            const double d = static_cast<double>(k) * step;
            const double v = dist.p_d[i] * std::log(d) + dist.p_g[i] * std::log1p(-d);
            if (v > best_v) {
                best_v = v;
                best[i] = d;
            }
        }
    }
    return best;
}

DiscreteJointDist random_distribution(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ContractError("random_distribution needs n > 0");
    SplitMix64 rng(derive_seed(seed, "distribution"));
    DiscreteJointDist d;
    for (auto* p : {&d.p_d, &d.p_g}) {
        p->resize(n);
        for (double& v : *p) v = -std::log(1.0 - rng.uniform());
        double s = 0.0;
        for (double v : *p) s += v;
        for (double& v : *p) v /= s;
    }
    for (std::size_t i = 0; i < n; ++i) d.support.push_back("o" + std::to_string(i));
    return d;
}

// ---------------------------------------------------------------------------
// PCA and the linear analogy

Eigen::MatrixXd to_matrix(const Tensor& t) {
    if (t.rank() < 1 || t.dim(0) == 0) throw ContractError("to_matrix needs a non-empty leading axis");
    const std::size_t n = t.dim(0), d = t.numel() / n;
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        t.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
}

Tensor from_matrix(const Eigen::MatrixXd& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), m.rows(), m.cols()) = m;
    return Tensor::from({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
}

namespace {

struct Spectrum {
    Eigen::VectorXd mean;
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // matching columns
};

Spectrum spectrum(const Eigen::MatrixXd& data) {
    if (data.rows() < 2) throw ContractError("pca needs at least two samples");
    Spectrum s;
    s.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - s.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw DomainError("pca eigen-decomposition failed");
    s.values = es.eigenvalues().reverse().cwiseMax(0.0);
    s.vectors = es.eigenvectors().rowwise().reverse();
    return s;
}

Pca take(const Spectrum& s, std::size_t dim) {
    const auto d = static_cast<std::size_t>(s.values.size());
    if (dim == 0 || dim > d) throw ContractError("pca dimension must be in [1, " + std::to_string(d) + "]");
    const double total = s.values.sum();
    if (!(total > 0.0) || s.values(static_cast<Eigen::Index>(dim) - 1) <= 1e-12 * s.values(0))
        throw DomainError("data are rank-deficient for a " + std::to_string(dim) + "-dimensional fit");
    Pca p;
    const auto k = static_cast<Eigen::Index>(dim);
    p.mean = s.mean;
    p.components = s.vectors.leftCols(k);
    p.variances = s.values.head(k);
    p.retained = p.variances.sum() / total;
    return p;
}

}  // namespace

Pca pca_fit(const Eigen::MatrixXd& data, std::size_t dim) { return take(spectrum(data), dim); }

Pca pca_fit_variance(const Eigen::MatrixXd& data, double variance_fraction) {
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0)) throw ContractError("variance fraction must be in (0, 1]");
    const Spectrum s = spectrum(data);
    const double total = s.values.sum();
    if (!(total > 0.0)) throw DomainError("data have zero variance");
    double acc = 0.0;
    std::size_t k = 0;
    while (k < static_cast<std::size_t>(s.values.size()) && acc < variance_fraction * total)
        acc += s.values(static_cast<Eigen::Index>(k++));
    return take(s, std::max<std::size_t>(k, 1));
}

Eigen::MatrixXd pca_project(const Pca& p, const Eigen::MatrixXd& data) {
    return (data.rowwise() - p.mean.transpose()) * p.components;
}

Eigen::MatrixXd pca_reconstruct(const Pca& p, const Eigen::MatrixXd& coords) {
    return (coords * p.components.transpose()).rowwise() + p.mean.transpose();
}

Eigen::MatrixXd pca_apply(const Pca& p, const Eigen::MatrixXd& data) { return pca_reconstruct(p, pca_project(p, data)); }

Tensor LinearPathway::reconstruct(const Tensor& y) const { return matmul(u_d, matmul(u_e, y)); }
Tensor LinearPathway::regress(const Tensor& s) const { return matmul(u_d_g, matmul(u_e_g, s)); }

LinearPathway make_linear_pathway(const Pca& target_pca, std::size_t source_dim, bool share, std::uint64_t seed) {
    LinearPathway lp;
    lp.u_d = from_matrix(target_pca.components);
    lp.u_e = from_matrix(target_pca.components.transpose());
    const auto k = static_cast<std::size_t>(target_pca.components.cols());
    SplitMix64 rng(derive_seed(seed, "linear_pathway"));
    std::vector<double> e(k * source_dim);
    for (double& v : e) v = rng.normal() / std::sqrt(static_cast<double>(source_dim));
    lp.u_e_g = Tensor::from({k, source_dim}, std::move(e));
    if (share) {
        lp.u_d_g = lp.u_d;
    } else {
        std::vector<double> d(lp.u_d.numel());
        for (double& v : d) v = rng.normal() / std::sqrt(static_cast<double>(k));
        lp.u_d_g = Tensor::from(lp.u_d.shape(), std::move(d));
    }
    return lp;
}

double column_space_residual(const Tensor& u, const Tensor& y) {
    const Eigen::MatrixXd U = to_matrix(u), Y = to_matrix(y);
    if (U.rows() != Y.rows()) throw ContractError("column_space_residual: row mismatch");
    const Eigen::MatrixXd coef = U.colPivHouseholderQr().solve(Y);
    return (Y - U * coef).cwiseAbs().maxCoeff();
}

LinearAnalogyReport linear_analogy_demo(const Eigen::MatrixXd& data, std::size_t dim, const CorruptionSpec& noise,
                                        std::size_t channels, std::size_t side, std::size_t holdout) {
    if (static_cast<std::size_t>(data.cols()) != channels * side * side)
        throw ContractError("linear_analogy_demo: data width does not match C x side x side");
    if (holdout == 0 || static_cast<std::size_t>(data.rows()) <= holdout + 1)
        throw ContractError("linear_analogy_demo: not enough samples");
    const auto n_fit = data.rows() - static_cast<Eigen::Index>(holdout);
    const Eigen::MatrixXd fit = data.topRows(n_fit);
    const Eigen::MatrixXd held = data.bottomRows(static_cast<Eigen::Index>(holdout));
    const Pca p = dim == 0 ? pca_fit_variance(fit, 0.9) : pca_fit(fit, dim);

    LinearAnalogyReport r;
    r.dim = static_cast<std::size_t>(p.components.cols());
    r.retained_variance = p.retained;
    const Eigen::MatrixXd px = pca_apply(p, held);
    r.idempotence_error = (pca_apply(p, px) - px).cwiseAbs().maxCoeff();

    std::vector<double> flat(held.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), held.rows(),
                                                                                        held.cols()) = held;
    const Tensor imgs = Tensor::from({holdout, channels, side, side}, std::move(flat));
    const Eigen::MatrixXd noisy = to_matrix(corrupt(imgs, noise));
    const Eigen::MatrixXd pn = pca_apply(p, noisy);
    for (Eigen::Index i = 0; i < held.rows(); ++i) {
        r.d_ambient += (held.row(i) - noisy.row(i)).norm();
        r.d_subspace += (px.row(i) - pn.row(i)).norm();
    }
    r.d_ambient /= static_cast<double>(holdout);
    r.d_subspace /= static_cast<double>(holdout);

    // Reg pathway from corrupted sources to targets with the decoder shared.
    const LinearPathway lp = make_linear_pathway(p, static_cast<std::size_t>(data.cols()), true, noise.seed);
    const Eigen::MatrixXd src = (noisy.rowwise() - p.mean.transpose()).transpose();  // d x m, columns are samples
    r.reg_residual = column_space_residual(lp.u_d_g, lp.regress(from_matrix(src)));
    return r;
}

// ---------------------------------------------------------------------------
// Synthetic manifold experiment

namespace {

struct PhaseOutcome {
    std::size_t iterations = 0;
};

// Adam on `params` until validation stops improving by `min_improvement` for
// `patience` iterations, or `max_iterations`.
PhaseOutcome train_phase(const std::vector<Tensor>& params, const std::function<Tensor(std::size_t)>& loss,
                         const std::function<double()>& validate, const SyntheticConfig& cfg, std::size_t max_iterations,
                         double learning_rate, const char* phase) {
    TrainConfig tc;
    tc.learning_rate = learning_rate;
    tc.adam_beta1 = 0.9;
    tc.seed = cfg.seed;
    Adam opt(params, tc);
    double best = std::numeric_limits<double>::infinity();
    std::size_t last_improvement = 0;
    std::vector<std::vector<double>> best_weights;
    PhaseOutcome out;
    best = validate();
    for (const auto& p : params) best_weights.emplace_back(p.data().begin(), p.data().end());
    for (std::size_t it = 0; it < max_iterations; ++it) {
        opt.zero_grad();
        const Tensor l = loss(it);
        if (!std::isfinite(l.item()))
            throw DivergenceError(phase, cfg.seed,
                                  std::string("non-finite ") + phase + " loss at iteration " + std::to_string(it + 1));
        l.backward();
        opt.step();
        out.iterations = it + 1;
        if ((it + 1) % cfg.eval_interval == 0) {
            const double v = validate();
            if (best - v > cfg.min_improvement) {
                best = v;
                last_improvement = it + 1;
                best_weights.clear();
                for (const auto& p : params) best_weights.emplace_back(p.data().begin(), p.data().end());
            } else if (it + 1 - last_improvement >= cfg.patience) {
                break;
            }
        }
    }
    // Early stopping keeps the best validated weights.
    for (std::size_t i = 0; i < best_weights.size(); ++i) {
        Tensor p = params[i];
        std::copy(best_weights[i].begin(), best_weights[i].end(), p.mutable_data().begin());
    }
    return out;
}

void copy_prefix(const ParameterStore& from, const std::string& from_prefix, ParameterStore& to,
                 const std::string& to_prefix) {
    for (const auto& name : from.names()) {
        if (name.rfind(from_prefix, 0) != 0) continue;
        const std::string target = to_prefix + name.substr(from_prefix.size());
        Tensor dst = to.get(target);
        const Tensor& src = from.get(name);
        if (dst.shape() != src.shape()) throw ContractError("copy_prefix: shape mismatch for " + target);
        std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
    }
}

double total_l1(const Tensor& a, const Tensor& b) { return l1_metric(a, b) * static_cast<double>(a.numel()); }

}  // namespace

SyntheticResult run_synthetic_experiment(const SyntheticConfig& cfg) {
    if (cfg.batch_size < 2 || cfg.eval_interval == 0 || cfg.test_points == 0)
        throw ContractError("synthetic config: batch_size >= 2, eval_interval > 0, test_points > 0 required");
    if (cfg.decoder_init != "autoencoder" && cfg.decoder_init != "baseline")
        throw ContractError("synthetic config: decoder_init must be autoencoder or baseline");
    const GeneratorSpec reg_spec = mlp_generator_spec(3, cfg.code, 4, cfg.hidden, cfg.init_std, cfg.bias_init);
    const GeneratorSpec ae_spec = mlp_generator_spec(4, cfg.code, 4, cfg.hidden, cfg.init_std, cfg.bias_init);
    const ManifoldSample val = sample_manifold(cfg.validation_points, derive_seed(cfg.seed, "validation"));
    const ManifoldSample test = sample_manifold(cfg.test_points, derive_seed(cfg.seed, "test"));
    auto batch = [&](const char* phase, std::size_t it) {
        return sample_manifold(cfg.batch_size, derive_seed(derive_seed(cfg.seed, phase), static_cast<std::uint64_t>(it)));
    };
    constexpr NormMode mode = NormMode::train;  // no batch norm in these networks

    SyntheticResult res;

    // Pretraining keeps the best validated of `pretrain_restarts` initializations.
    struct Pretrained {
        std::unique_ptr<ParameterStore> store;
        std::unique_ptr<Pathway> net;
        double val = std::numeric_limits<double>::infinity();
        std::size_t iterations = 0;
    };
    auto pretrain = [&](const GeneratorSpec& spec, const std::string& name, const char* phase, bool autoencode) {
        Pretrained best;
        for (std::size_t r = 0; r < std::max<std::size_t>(cfg.pretrain_restarts, 1); ++r) {
            Pretrained cur;
            cur.store = std::make_unique<ParameterStore>();
            const std::uint64_t init = r == 0 ? derive_seed(cfg.seed, phase) : derive_seed(derive_seed(cfg.seed, phase), r);
            cur.net = std::make_unique<Pathway>(spec, *cur.store, name, init);
            const Pathway& net = *cur.net;
            auto validate = [&] {
                NoGradGuard ng;
                return l2_mean(net(autoencode ? val.outputs : val.inputs, mode), val.outputs).item();
            };
            cur.iterations = train_phase(
                                 cur.store->trainable_parameters(),
                                 [&](std::size_t it) {
                                     const auto b = batch(phase, it);
                                     return l2_mean(net(autoencode ? b.outputs : b.inputs, mode), b.outputs);
                                 },
                                 validate, cfg, cfg.pretrain_iterations, cfg.learning_rate, phase)
                                 .iterations;
            cur.val = validate();
            if (cur.val < best.val) best = std::move(cur);
        }
        return best;
    };
    const Pretrained pre_base = pretrain(reg_spec, "B", "baseline", false);
    const Pretrained pre_ae = pretrain(ae_spec, "A", "autoencoder", true);
    res.baseline_iterations = pre_base.iterations;
    res.ae_iterations = pre_ae.iterations;
    const Pathway& base = *pre_base.net;
    const Pathway& ae = *pre_ae.net;
    const ParameterStore& base_store = *pre_base.store;
    const ParameterStore& ae_store = *pre_ae.store;

    // Two-pathway network initialized from the pretrained modules.
    ParameterStore store;
    const Pathway reg(reg_spec, store, "G", cfg.seed);
    const Pathway aep(ae_spec, store, "AE", cfg.seed);
    if (cfg.share_decoder) {
        const auto a = reg.decoder().parameter_names(), b = aep.decoder().parameter_names();
        for (std::size_t i = 0; i < a.size(); ++i) share_parameters(store, {a[i], b[i]});
    }
    copy_prefix(base_store, "enc_B.", store, "enc_G.");
    copy_prefix(ae_store, "enc_A.", store, "enc_AE.");
    if (cfg.decoder_init == "baseline") {
        copy_prefix(base_store, "dec_B.", store, "dec_G.");
        if (!cfg.share_decoder) copy_prefix(ae_store, "dec_A.", store, "dec_AE.");
    } else {
        copy_prefix(ae_store, "dec_A.", store, "dec_AE.");
        if (!cfg.share_decoder) copy_prefix(base_store, "dec_B.", store, "dec_G.");
    }

    auto joint_loss = [&](const char* phase) {
        return [&, phase](std::size_t it) {
            const auto b = batch(phase, it);
            const auto r = reg.forward_with_skips(b.inputs, mode);
            const auto a = aep.forward_with_skips(b.outputs, mode);
            Tensor l = add(l2_mean(r.output, b.outputs), l2_mean(a.output, b.outputs));
            return add(l, mul(latent_loss(r.code, a.code), cfg.lambda_latent));
        };
    };
    auto joint_val = [&] {
        NoGradGuard ng;
        return l2_mean(reg(val.inputs, mode), val.outputs).item();
    };
    // The pretrained encoders speak different codes; fit the reg encoder to the
    // shared decoder first so the joint phase does not start from garbage outputs.
    if (cfg.alignment_iterations > 0)
        res.alignment_iterations = train_phase(store.trainable_parameters("enc_G."), joint_loss("alignment"), joint_val,
                                               cfg, cfg.alignment_iterations, cfg.learning_rate, "alignment")
                                       .iterations;
    res.joint_iterations = train_phase(store.trainable_parameters(), joint_loss("joint"), joint_val, cfg,
                                       cfg.max_iterations, cfg.joint_learning_rate, "joint")
                               .iterations;

    NoGradGuard ng;
    res.test_coords = test.coords;
    res.test_targets = test.outputs;
    res.baseline_outputs = base(test.inputs, mode);
    res.twopathway_outputs = reg(test.inputs, mode);
    res.l1_baseline = total_l1(res.baseline_outputs, test.outputs);
    res.l1_twopathway = total_l1(res.twopathway_outputs, test.outputs);
    res.l1_autoencoder = total_l1(aep(test.outputs, mode), test.outputs);
    res.l1_pretrained_autoencoder = total_l1(ae(test.outputs, mode), test.outputs);
    return res;
}

}  // namespace rocgan
