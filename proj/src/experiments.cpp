#include "rocgan/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "rocgan/errors.hpp"
#include "rocgan/plot.hpp"
#include "rocgan/rng.hpp"
#include "rocgan/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rocgan {

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Strict object reader: every key must be consumed, types are checked.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json* take(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
        return &j_.at(key);
    }

    std::string path(const std::string& key) const { return join(path_, key); }

    void number(const std::string& key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) throw ConfigError(path(key), "must be a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(path(key), "must be finite");
        }
    }

    void optional_number(const std::string& key, std::optional<double>& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) throw ConfigError(path(key), "must be a number or null");
            out = v->get<double>();
        }
    }

    template <class U>
    void count(const std::string& key, U& out) {
        if (const json* v = take(key)) out = as_count<U>(*v, path(key));
    }

    void string(const std::string& key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) throw ConfigError(path(key), "must be a string");
            out = v->get<std::string>();
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) throw ConfigError(path(key), "must be true or false");
            out = v->get<bool>();
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }

    template <class U>
    static U as_count(const json& v, const std::string& where) {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
            throw ConfigError(where, "must be a non-negative integer");
        return static_cast<U>(v.get<unsigned long long>());
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

const std::map<std::string, double LossWeights::*>& weight_fields() {
    static const std::map<std::string, double LossWeights::*> f = {{"lambda_c", &LossWeights::lambda_c},
                                                                    {"lambda_pi", &LossWeights::lambda_pi},
                                                                    {"lambda_ae", &LossWeights::lambda_ae},
                                                                    {"lambda_l", &LossWeights::lambda_l},
                                                                    {"lambda_decov", &LossWeights::lambda_decov}};
    return f;
}

void check_noise(const std::string& label, const std::string& where) {
    try {
        CorruptionSpec::parse(label);
    } catch (const std::exception& e) {
        throw ConfigError(where, e.what());
    }
}

// Desk-scale defaults per experiment.
void apply_defaults(ExperimentConfig& c, bool has_train_noise, bool has_eval_noise) {
    std::string train = "25/0";
    std::vector<std::string> eval = {"25/0", "35/0"};
    if (c.experiment == "image_inpaint") {
        train = "0/50";
        eval = {"0/50", "0/75"};
    } else if (c.experiment == "robustness_grid") {
        eval.clear();
        for (const auto& g : robustness_grid()) eval.push_back(g.label());
    } else if (c.experiment == "fgsm" || c.experiment == "ablation_lambda" || c.experiment == "semi_supervised") {
        eval = {"25/0"};
    }
    if (!has_train_noise) c.train_noise = train;
    if (!has_eval_noise) c.eval_noise = eval;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    Reader top(j, "");
    if (!top.has("experiment")) throw ConfigError("experiment", "missing required field");
    top.string("experiment", c.experiment);
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end())
        throw ConfigError("experiment", "unknown experiment '" + c.experiment + "'");
    top.string("output_dir", c.output_dir);
    if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

    if (const json* s = top.take("seeds")) {
        if (!s->is_array()) throw ConfigError("seeds", "must be an array of integers");
        c.seeds.clear();
        for (std::size_t i = 0; i < s->size(); ++i)
            c.seeds.push_back(Reader::as_count<std::uint64_t>(s->at(i), "seeds[" + std::to_string(i) + "]"));
    }
    if (c.seeds.empty()) throw ConfigError("seeds", "must not be empty");

    if (const json* m = top.take("modes")) {
        if (!m->is_array() || m->empty()) throw ConfigError("modes", "must be a non-empty array of mode names");
        c.modes.clear();
        for (std::size_t i = 0; i < m->size(); ++i) {
            const std::string where = "modes[" + std::to_string(i) + "]";
            if (!m->at(i).is_string()) throw ConfigError(where, "must be a string");
            try {
                c.modes.push_back(parse_train_mode(m->at(i).get<std::string>()));
            } catch (const ContractError& e) {
                throw ConfigError(where, e.what());
            }
        }
    }

    if (const json* t = top.take("train")) {
        Reader r(*t, "train");
        r.number("learning_rate", c.train.learning_rate);
        r.number("adam_beta1", c.train.adam_beta1);
        r.number("adam_beta2", c.train.adam_beta2);
        r.number("adam_eps", c.train.adam_eps);
        r.count("batch_size", c.train.batch_size);
        r.count("iterations", c.train.iterations);
        r.optional_number("clip_norm", c.train.clip_norm);
        r.count("log_every", c.log_every);
        r.count("checkpoint_every", c.checkpoint_every);
        std::string adv = c.train.generator_adversarial == GeneratorAdversarial::minimax ? "minimax" : "non_saturating";
        r.string("generator_adversarial", adv);
        if (adv == "minimax") c.train.generator_adversarial = GeneratorAdversarial::minimax;
        else if (adv == "non_saturating") c.train.generator_adversarial = GeneratorAdversarial::non_saturating;
        else throw ConfigError("train.generator_adversarial", "must be non_saturating or minimax");
        if (const json* w = r.take("loss_weights")) {
            Reader wr(*w, "train.loss_weights");
            for (const auto& [name, field] : weight_fields()) {
                wr.number(name, c.train.loss_weights.*field);
                if (c.train.loss_weights.*field < 0.0) throw ConfigError(wr.path(name), "must be >= 0");
            }
            wr.finish();
        }
        r.finish();
        if (!(c.train.learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
        if (c.train.batch_size < 2) throw ConfigError("train.batch_size", "must be >= 2 (batch norm)");
        if (!(c.train.adam_beta1 >= 0.0 && c.train.adam_beta1 < 1.0))
            throw ConfigError("train.adam_beta1", "must be in [0, 1)");
        if (!(c.train.adam_beta2 >= 0.0 && c.train.adam_beta2 < 1.0))
            throw ConfigError("train.adam_beta2", "must be in [0, 1)");
        if (!(c.train.adam_eps > 0.0)) throw ConfigError("train.adam_eps", "must be > 0");
        if (c.train.clip_norm && !(*c.train.clip_norm > 0.0)) throw ConfigError("train.clip_norm", "must be > 0");
        if (c.log_every == 0) throw ConfigError("train.log_every", "must be > 0");
    }

    if (const json* d = top.take("data")) {
        Reader r(*d, "data");
        r.string("architecture", c.data.architecture);
        r.count("side", c.data.side);
        r.number("channel_scale", c.data.channel_scale);
        r.count("train_samples", c.data.train_samples);
        r.count("test_samples", c.data.test_samples);
        r.string("manifest", c.data.manifest);
        r.finish();
        try {
            parse_architecture(c.data.architecture);
        } catch (const ContractError& e) {
            throw ConfigError("data.architecture", e.what());
        }
        if (c.data.side != 16 && c.data.side != 32 && c.data.side != 64)
            throw ConfigError("data.side", "must be 16, 32 or 64");
        if (!(c.data.channel_scale > 0.0)) throw ConfigError("data.channel_scale", "must be > 0");
        if (c.data.train_samples < 2) throw ConfigError("data.train_samples", "must be >= 2");
        if (c.data.test_samples < 1) throw ConfigError("data.test_samples", "must be >= 1");
        if (!c.data.manifest.empty() && !fs::exists(c.data.manifest))
            throw ConfigError("data.manifest", "file does not exist: " + c.data.manifest);
    }

    bool has_train_noise = false, has_eval_noise = false;
    if (const json* n = top.take("noise")) {
        Reader r(*n, "noise");
        has_train_noise = r.has("train");
        r.string("train", c.train_noise);
        if (has_train_noise) check_noise(c.train_noise, "noise.train");
        if (const json* e = r.take("eval")) {
            if (!e->is_array() || e->empty()) throw ConfigError("noise.eval", "must be a non-empty array of x/y labels");
            has_eval_noise = true;
            c.eval_noise.clear();
            for (std::size_t i = 0; i < e->size(); ++i) {
                const std::string where = "noise.eval[" + std::to_string(i) + "]";
                if (!e->at(i).is_string()) throw ConfigError(where, "must be an x/y label");
                c.eval_noise.push_back(e->at(i).get<std::string>());
                check_noise(c.eval_noise.back(), where);
            }
        }
        r.finish();
    }
    apply_defaults(c, has_train_noise, has_eval_noise);

    if (const json* s = top.take("synthetic")) {
        Reader r(*s, "synthetic");
        auto& y = c.synthetic;
        r.count("hidden", y.hidden);
        r.count("code", y.code);
        r.number("init_std", y.init_std);
        r.number("bias_init", y.bias_init);
        r.number("learning_rate", y.learning_rate);
        r.number("joint_learning_rate", y.joint_learning_rate);
        r.count("batch_size", y.batch_size);
        r.count("max_iterations", y.max_iterations);
        r.count("pretrain_iterations", y.pretrain_iterations);
        r.count("patience", y.patience);
        r.number("min_improvement", y.min_improvement);
        r.count("validation_points", y.validation_points);
        r.count("eval_interval", y.eval_interval);
        r.count("test_points", y.test_points);
        r.number("lambda_latent", y.lambda_latent);
        r.boolean("share_decoder", y.share_decoder);
        r.string("decoder_init", y.decoder_init);
        r.count("alignment_iterations", y.alignment_iterations);
        r.count("pretrain_restarts", y.pretrain_restarts);
        r.finish();
        if (y.decoder_init != "autoencoder" && y.decoder_init != "baseline")
            throw ConfigError("synthetic.decoder_init", "must be 'autoencoder' or 'baseline'");
        if (y.pretrain_restarts == 0) throw ConfigError("synthetic.pretrain_restarts", "must be >= 1");
        if (y.hidden == 0 || y.code == 0) throw ConfigError("synthetic.hidden", "layer widths must be > 0");
        if (y.batch_size < 2) throw ConfigError("synthetic.batch_size", "must be >= 2");
        if (!(y.learning_rate > 0.0)) throw ConfigError("synthetic.learning_rate", "must be > 0");
        if (!(y.joint_learning_rate > 0.0)) throw ConfigError("synthetic.joint_learning_rate", "must be > 0");
        if (y.eval_interval == 0) throw ConfigError("synthetic.eval_interval", "must be > 0");
        if (y.test_points == 0) throw ConfigError("synthetic.test_points", "must be > 0");
    }

    if (const json* f = top.take("fgsm")) {
        Reader r(*f, "fgsm");
        r.number("epsilon", c.fgsm.epsilon);
        r.count("samples", c.fgsm.samples);
        r.finish();
        if (!(c.fgsm.epsilon > 0.0)) throw ConfigError("fgsm.epsilon", "must be > 0");
        if (c.fgsm.samples == 0) throw ConfigError("fgsm.samples", "must be > 0");
    }

    if (const json* t = top.take("theory")) {
        Reader r(*t, "theory");
        r.count("distributions", c.theory.distributions);
        r.count("support", c.theory.support);
        r.number("grid_step", c.theory.grid_step);
        r.finish();
        if (c.theory.support == 0) throw ConfigError("theory.support", "must be > 0");
        if (!(c.theory.grid_step > 0.0 && c.theory.grid_step < 0.5)) throw ConfigError("theory.grid_step", "must be in (0, 0.5)");
    }

    if (const json* l = top.take("linear_analogy")) {
        Reader r(*l, "linear_analogy");
        r.count("samples", c.linear_analogy.samples);
        r.count("side", c.linear_analogy.side);
        r.count("dim", c.linear_analogy.dim);
        r.count("holdout", c.linear_analogy.holdout);
        r.string("noise", c.linear_analogy.noise);
        r.finish();
        check_noise(c.linear_analogy.noise, "linear_analogy.noise");
        if (c.linear_analogy.side != 16 && c.linear_analogy.side != 32 && c.linear_analogy.side != 64)
            throw ConfigError("linear_analogy.side", "must be 16, 32 or 64");
        if (c.linear_analogy.holdout == 0 || c.linear_analogy.samples <= c.linear_analogy.holdout + 1)
            throw ConfigError("linear_analogy.samples", "must exceed holdout + 1");
    }

    if (const json* a = top.take("ablation")) {
        if (!a->is_object()) throw ConfigError("ablation", "must map loss weight names to value lists");
        for (auto it = a->begin(); it != a->end(); ++it) {
            const std::string where = "ablation." + it.key();
            if (!weight_fields().count(it.key())) throw ConfigError(where, "unknown loss weight");
            if (!it->is_array() || it->empty()) throw ConfigError(where, "must be a non-empty array of numbers");
            auto& values = c.ablation[it.key()];
            for (std::size_t i = 0; i < it->size(); ++i) {
                const auto& v = it->at(i);
                if (!v.is_number() || v.get<double>() < 0.0)
                    throw ConfigError(where + "[" + std::to_string(i) + "]", "must be a number >= 0");
                values.push_back(v.get<double>());
            }
        }
    }
    if (c.experiment == "ablation_lambda" && c.ablation.empty())
        throw ConfigError("ablation", "ablation_lambda needs at least one sweep");

    if (const json* s = top.take("semi_supervised")) {
        Reader r(*s, "semi_supervised");
        r.count("labelled_count", c.semi_supervised.labelled_count);
        r.count("unlabelled_count", c.semi_supervised.unlabelled_count);
        r.finish();
    }
    if (c.experiment == "semi_supervised" && c.semi_supervised.labelled_count < 2)
        throw ConfigError("semi_supervised.labelled_count", "must be >= 2");

    top.finish();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("/", "cannot open config file " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("/", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

json ExperimentConfig::to_json() const {
    json w;
    for (const auto& [name, field] : weight_fields()) w[name] = train.loss_weights.*field;
    json modes_j = json::array();
    for (auto m : modes) modes_j.push_back(to_string(m));
    json abl = json::object();
    for (const auto& [k, v] : ablation) abl[k] = v;
    return {
        {"experiment", experiment},
        {"output_dir", output_dir},
        {"seeds", seeds},
        {"modes", modes_j},
        {"train",
         {{"learning_rate", train.learning_rate},
          {"adam_beta1", train.adam_beta1},
          {"adam_beta2", train.adam_beta2},
          {"adam_eps", train.adam_eps},
          {"batch_size", train.batch_size},
          {"iterations", train.iterations},
          {"clip_norm", train.clip_norm ? json(*train.clip_norm) : json(nullptr)},
          {"log_every", log_every},
          {"checkpoint_every", checkpoint_every},
          {"generator_adversarial",
           train.generator_adversarial == GeneratorAdversarial::minimax ? "minimax" : "non_saturating"},
          {"loss_weights", w}}},
        {"data",
         {{"architecture", data.architecture},
          {"side", data.side},
          {"channel_scale", data.channel_scale},
          {"train_samples", data.train_samples},
          {"test_samples", data.test_samples},
          {"manifest", data.manifest}}},
        {"noise", {{"train", train_noise}, {"eval", eval_noise}}},
        {"synthetic",
         {{"hidden", synthetic.hidden},
          {"code", synthetic.code},
          {"init_std", synthetic.init_std},
          {"bias_init", synthetic.bias_init},
          {"learning_rate", synthetic.learning_rate},
          {"joint_learning_rate", synthetic.joint_learning_rate},
          {"batch_size", synthetic.batch_size},
          {"max_iterations", synthetic.max_iterations},
          {"pretrain_iterations", synthetic.pretrain_iterations},
          {"patience", synthetic.patience},
          {"min_improvement", synthetic.min_improvement},
          {"validation_points", synthetic.validation_points},
          {"eval_interval", synthetic.eval_interval},
          {"test_points", synthetic.test_points},
          {"lambda_latent", synthetic.lambda_latent},
          {"share_decoder", synthetic.share_decoder},
          {"decoder_init", synthetic.decoder_init},
          {"alignment_iterations", synthetic.alignment_iterations},
          {"pretrain_restarts", synthetic.pretrain_restarts}}},
        {"fgsm", {{"epsilon", fgsm.epsilon}, {"samples", fgsm.samples}}},
        {"theory",
         {{"distributions", theory.distributions}, {"support", theory.support}, {"grid_step", theory.grid_step}}},
        {"linear_analogy",
         {{"samples", linear_analogy.samples},
          {"side", linear_analogy.side},
          {"dim", linear_analogy.dim},
          {"holdout", linear_analogy.holdout},
          {"noise", linear_analogy.noise}}},
        {"ablation", abl},
        {"semi_supervised",
         {{"labelled_count", semi_supervised.labelled_count}, {"unlabelled_count", semi_supervised.unlabelled_count}}},
    };
}

// ---------------------------------------------------------------------------
// Image models

ImageSetup make_image_setup(const ImageDataConfig& data, TrainMode mode, std::uint64_t seed) {
    ImageSetup s;
    const Architecture arch = parse_architecture(data.architecture);
    s.generator = image_generator_spec(arch, data.side, 3, data.channel_scale, mode == TrainMode::rocgan_skip);
    s.discriminator = discriminator_spec(data.channel_scale);
    if (data.manifest.empty()) {
        s.train_images = gen_procedural_images(data.train_samples, data.side, derive_seed(seed, "train_images")).images;
        s.test_images = gen_procedural_images(data.test_samples, data.side, derive_seed(seed, "test_images")).images;
        return s;
    }
    std::ifstream f(data.manifest);
    const json m = json::parse(f);
    const Tensor all = read_tensor((fs::path(data.manifest).parent_path() / m.at("images").get<std::string>()).string());
    if (all.rank() != 4 || all.dim(2) != data.side || all.dim(3) != data.side)
        throw ConfigError("data.manifest", "dataset images are " + shape_str(all.shape()) + ", expected side " +
                                               std::to_string(data.side));
    if (all.dim(0) < data.test_samples + 2)
        throw ConfigError("data.manifest", "dataset has fewer samples than test_samples + 2");
    const std::size_t n_train = all.dim(0) - data.test_samples;
    s.train_images = slice_batch(all, 0, n_train);
    s.test_images = slice_batch(all, n_train, data.test_samples);
    return s;
}

ImageModel TrainedModel::model() const {
    const ImageTrainer* t = trainer.get();
    return [t](const Tensor& s) { return t->generate(s, NormMode::eval); };
}

TrainedModel train_image_model(const ImageSetup& setup, TrainMode mode, const TrainConfig& base, std::uint64_t seed,
                               const CorruptionSpec& noise, std::size_t log_every, const Tensor& unlabelled,
                               std::size_t checkpoint_every, const std::string& checkpoint_dir) {
    TrainConfig cfg = base;
    cfg.mode = mode;
    cfg.seed = seed;
    TrainedModel out;
    GeneratorSpec g = setup.generator;
    if (mode == TrainMode::rocgan_skip && g.lateral.empty()) throw ContractError("rocgan_skip needs a skip generator spec");
    out.trainer = std::make_unique<ImageTrainer>(g, setup.discriminator, cfg);
    ImageTrainOptions opt;
    opt.noise = noise;
    opt.checkpoint_every = checkpoint_every;
    opt.checkpoint_dir = checkpoint_dir;
    opt.on_step = [&](const StepMetrics& m) {
        if (m.step % log_every == 0 || m.step == 1) out.log.push_back(m);
    };
    if (unlabelled.defined())
        train_semi_supervised(*out.trainer, setup.train_images, unlabelled, opt);
    else
        train_images(*out.trainer, setup.train_images, opt);
    return out;
}

void write_steps_csv(const std::vector<StepMetrics>& log, const std::string& path) {
    static const char* terms[] = {"adv", "content", "feature", "ae", "latent", "decov"};
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write " + path);
    f << std::setprecision(10);
    f << "step,d_loss,g_total";
    for (const char* t : terms) f << ',' << t;
    f << ",labelled,unlabelled\n";
    for (const auto& m : log) {
        f << m.step << ',' << m.d_loss << ',' << m.g_total;
        for (const char* t : terms) {
            f << ',';
            if (m.has_term(t)) f << m.term(t);
        }
        f << ',' << m.labelled_in_batch << ',' << m.unlabelled_in_batch << '\n';
    }
}

std::size_t worker_threads() {
    if (const char* v = std::getenv("ROCGAN_LAB_THREADS")) {
        try {
            const long n = std::stol(v);
            if (n >= 1) return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

struct SeedContext {
    const ExperimentConfig& cfg;
    std::uint64_t seed;
    fs::path dir;
    std::ostream* log;
    std::mutex* log_mutex;

    void say(const std::string& msg) const {
        if (!log) return;
        std::lock_guard<std::mutex> lock(*log_mutex);
        *log << "[seed " << seed << "] " << msg << std::endl;
    }
    std::string file(const std::string& stem, const char* ext) const {
        return (dir / (stem + "_seed" + std::to_string(seed) + ext)).string();
    }
};

CorruptionSpec noise_of(const std::string& label) { return CorruptionSpec::parse(label); }

std::vector<CorruptionSpec> grid_of(const std::vector<std::string>& labels) {
    std::vector<CorruptionSpec> g;
    for (const auto& l : labels) g.push_back(noise_of(l));
    return g;
}

void write_shared_histograms(const SeedContext& ctx, const std::vector<std::pair<std::string, EvalReport>>& reports,
                             const std::string& stem) {
    if (reports.empty()) return;
    const auto& labels = reports.front().second.cells;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        double lo = 0.0;
        for (const auto& [name, rep] : reports)
            if (c < rep.cells.size())
                for (double v : rep.cells[c].per_sample_ssim) lo = std::min(lo, v);
        std::vector<Histogram> hs;
        for (const auto& [name, rep] : reports) hs.push_back(histogram(rep.cells.at(c).per_sample_ssim, lo, 1.0, 20));
        std::string label = labels[c].label;
        std::replace(label.begin(), label.end(), '/', '-');
        const std::string path = ctx.file(stem + "_hist_" + label, ".csv");
        {
            std::ofstream f(path);
            f << std::setprecision(17) << "bin_lo,bin_hi";
            for (const auto& [name, rep] : reports) f << ',' << name;
            f << '\n';
            for (std::size_t b = 0; b < 20; ++b) {
                f << hs[0].edges[b] << ',' << hs[0].edges[b + 1];
                for (const auto& h : hs) f << ',' << h.counts[b];
                f << '\n';
            }
        }
        plot_csv(path, PlotKind::histogram, path.substr(0, path.size() - 4) + ".svg");
    }
}

void save_model_artifacts(const SeedContext& ctx, const std::string& tag, const TrainedModel& m) {
    const std::string steps = ctx.file("steps_" + tag, ".csv");
    write_steps_csv(m.log, steps);
    plot_csv(steps, PlotKind::curve, steps.substr(0, steps.size() - 4) + ".svg");
    save_checkpoint(m.trainer->store(),
                    (ctx.dir / "checkpoints" / (tag + "_seed" + std::to_string(ctx.seed))).string());
}

// Periodic checkpoints land next to the final one, in <tag>_seed<k>_steps/step_<n>.
TrainedModel fit(const SeedContext& ctx, const ImageSetup& setup, TrainMode mode, const TrainConfig& t,
                 const std::string& tag, const Tensor& unlabelled = {}) {
    const std::string dir = (ctx.dir / "checkpoints" / (tag + "_seed" + std::to_string(ctx.seed) + "_steps")).string();
    return train_image_model(setup, mode, t, ctx.seed, noise_of(ctx.cfg.train_noise), ctx.cfg.log_every, unlabelled,
                             ctx.cfg.checkpoint_every, dir);
}

TrainConfig train_config_for(const ExperimentConfig& cfg) {
    TrainConfig t = cfg.train;
    return t;
}

std::vector<EvalRow> run_image_grid(const SeedContext& ctx) {
    const auto& cfg = ctx.cfg;
    std::vector<EvalRow> rows;
    std::vector<std::pair<std::string, EvalReport>> reports;
    for (TrainMode mode : cfg.modes) {
        const std::string tag = to_string(mode);
        ctx.say("training " + tag);
        const ImageSetup setup = make_image_setup(cfg.data, mode, ctx.seed);
        const TrainedModel m = fit(ctx, setup, mode, train_config_for(cfg), tag);
        save_model_artifacts(ctx, tag, m);
        // The AAE reconstructs clean targets: it is evaluated without corruption.
        const auto grid = mode == TrainMode::aae ? std::vector<CorruptionSpec>{CorruptionSpec{}} : grid_of(cfg.eval_noise);
        EvalReport rep = eval_grid(m.model(), setup.test_images, grid, ctx.seed, cfg.experiment + "/" + tag);
        for (auto& r : rep.rows()) rows.push_back(r);
        if (mode != TrainMode::aae) reports.emplace_back(tag, std::move(rep));
    }
    write_shared_histograms(ctx, reports, cfg.experiment);
    return rows;
}

std::vector<EvalRow> run_fgsm(const SeedContext& ctx) {
    const auto& cfg = ctx.cfg;
    std::vector<EvalRow> rows;
    for (TrainMode mode : cfg.modes) {
        if (mode == TrainMode::aae) continue;
        const std::string tag = to_string(mode), id = "fgsm/" + tag;
        ctx.say("training " + tag);
        ImageDataConfig data = cfg.data;
        data.test_samples = std::max(data.test_samples, cfg.fgsm.samples);
        const ImageSetup setup = make_image_setup(data, mode, ctx.seed);
        const TrainedModel m = fit(ctx, setup, mode, train_config_for(cfg), tag);
        save_model_artifacts(ctx, tag, m);
        CorruptionSpec noise = noise_of(cfg.train_noise);
        noise.seed = derive_seed(ctx.seed, "fgsm/noise");
        const Tensor clean = slice_batch(setup.test_images, 0, cfg.fgsm.samples);
        const Tensor s = to_signed(corrupt(clean, noise));
        const Tensor y = to_signed(clean);
        const ImageModel model = m.model();
        const Tensor adv = fgsm_attack(model, s, y, cfg.fgsm.epsilon);
        const Tensor rnd = random_sign_perturbation(s, cfg.fgsm.epsilon, ctx.seed);
        NoGradGuard ng;
        auto mean_ssim = [&](const Tensor& in) {
            const auto v = ssim_batch(to_unit(model(in)), clean);
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        const double ssim_clean = mean_ssim(s), ssim_adv = mean_ssim(adv);
        double eta = 0.0;
        for (std::size_t i = 0; i < s.numel(); ++i) eta = std::max(eta, std::abs(adv[i] - s[i]));
        const std::string lbl = cfg.train_noise;
        rows.push_back({id, lbl, "ssim_clean", ssim_clean, ctx.seed});
        rows.push_back({id, lbl, "ssim_fgsm", ssim_adv, ctx.seed});
        rows.push_back({id, lbl, "ssim_drop", ssim_clean - ssim_adv, ctx.seed});
        rows.push_back({id, lbl, "loss_clean", l1_mean(model(s), y).item(), ctx.seed});
        rows.push_back({id, lbl, "loss_fgsm", l1_mean(model(adv), y).item(), ctx.seed});
        rows.push_back({id, lbl, "loss_random", l1_mean(model(rnd), y).item(), ctx.seed});
        rows.push_back({id, lbl, "eta_linf", eta, ctx.seed});
    }
    return rows;
}

std::vector<EvalRow> run_synthetic(const SeedContext& ctx) {
    SyntheticConfig sc = ctx.cfg.synthetic;
    sc.seed = ctx.seed;
    ctx.say("synthetic experiment");
    const SyntheticResult r = run_synthetic_experiment(sc);
    const std::string path = ctx.file("synthetic_outputs", ".csv");
    {
        std::ofstream f(path);
        f << std::setprecision(10) << "x,y";
        for (const char* g : {"target", "baseline", "ours"})
            for (int k = 0; k < 4; ++k) f << ',' << g << '_' << k;
        f << '\n';
        for (std::size_t i = 0; i < r.test_coords.dim(0); ++i) {
            f << r.test_coords[2 * i] << ',' << r.test_coords[2 * i + 1];
            for (const Tensor* t : {&r.test_targets, &r.baseline_outputs, &r.twopathway_outputs})
                for (std::size_t k = 0; k < 4; ++k) f << ',' << (*t)[4 * i + k];
            f << '\n';
        }
    }
    plot_csv(path, PlotKind::manifold3d, path.substr(0, path.size() - 4) + ".svg");
    return {{"synthetic", "-", "l1_baseline", r.l1_baseline, ctx.seed},
            {"synthetic", "-", "l1_twopathway", r.l1_twopathway, ctx.seed},
            {"synthetic", "-", "ratio", r.l1_twopathway / r.l1_baseline, ctx.seed},
            {"synthetic", "-", "iterations_baseline", static_cast<double>(r.baseline_iterations), ctx.seed},
            {"synthetic", "-", "iterations_autoencoder", static_cast<double>(r.ae_iterations), ctx.seed},
            {"synthetic", "-", "iterations_joint", static_cast<double>(r.joint_iterations), ctx.seed}};
}

std::vector<EvalRow> run_theory(const SeedContext& ctx) {
    const auto& tc = ctx.cfg.theory;
    std::vector<EvalRow> rows;
    {
        DiscreteJointDist eq{{"a", "b", "c", "d"}, {0.1, 0.2, 0.3, 0.4}, {0.1, 0.2, 0.3, 0.4}};
        const auto d = optimal_discriminator(eq);
        rows.push_back({"theory", "p_d=p_g", "value_at_dstar", gan_value(eq, d), ctx.seed});
        rows.push_back({"theory", "p_d=p_g", "minus_log4", -std::log(4.0), ctx.seed});
        rows.push_back({"theory", "p_d=p_g", "jsd", jsd(eq.p_d, eq.p_g), ctx.seed});
    }
    {
        DiscreteJointDist two{{"a", "b"}, {0.8, 0.2}, {0.2, 0.8}};
        rows.push_back({"theory", "p_d=0.8:0.2|p_g=0.2:0.8", "jsd", jsd(two.p_d, two.p_g), ctx.seed});
        rows.push_back(
            {"theory", "p_d=0.8:0.2|p_g=0.2:0.8", "value_at_dstar", gan_value(two, optimal_discriminator(two)), ctx.seed});
    }
    double grid_err = 0.0, identity_err = 0.0;
    for (std::size_t i = 0; i < tc.distributions; ++i) {
        const DiscreteJointDist d = random_distribution(tc.support, derive_seed(ctx.seed, i));
        const auto star = optimal_discriminator(d);
        const auto grid = grid_search_discriminator(d, tc.grid_step);
        for (std::size_t k = 0; k < star.size(); ++k) grid_err = std::max(grid_err, std::abs(star[k] - grid[k]));
        identity_err = std::max(identity_err, std::abs(gan_value(d, star) - (-std::log(4.0) + 2.0 * jsd(d.p_d, d.p_g))));
    }
    const std::string lbl = "random/" + std::to_string(tc.distributions);
    rows.push_back({"theory", lbl, "max_grid_error", grid_err, ctx.seed});
    rows.push_back({"theory", lbl, "max_identity_error", identity_err, ctx.seed});
    return rows;
}

std::vector<EvalRow> run_linear_analogy(const SeedContext& ctx) {
    const auto& lc = ctx.cfg.linear_analogy;
    const ProceduralSet set = gen_procedural_images(lc.samples, lc.side, derive_seed(ctx.seed, "linear_analogy"));
    CorruptionSpec noise = noise_of(lc.noise);
    noise.seed = derive_seed(ctx.seed, "linear_analogy/noise");
    const LinearAnalogyReport r = linear_analogy_demo(to_matrix(set.images), lc.dim, noise, 3, lc.side, lc.holdout);
    const std::string id = "linear_analogy";
    return {{id, lc.noise, "dim", static_cast<double>(r.dim), ctx.seed},
            {id, lc.noise, "retained_variance", r.retained_variance, ctx.seed},
            {id, lc.noise, "idempotence_error", r.idempotence_error, ctx.seed},
            {id, lc.noise, "reg_residual", r.reg_residual, ctx.seed},
            {id, lc.noise, "d_ambient", r.d_ambient, ctx.seed},
            {id, lc.noise, "d_subspace", r.d_subspace, ctx.seed}};
}

std::string value_label(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::vector<EvalRow> run_ablation(const SeedContext& ctx) {
    const auto& cfg = ctx.cfg;
    std::vector<EvalRow> rows;
    const TrainMode mode = cfg.modes.size() == 1 ? cfg.modes.front() : TrainMode::rocgan;
    const ImageSetup setup = make_image_setup(cfg.data, mode, ctx.seed);
    for (const auto& [name, values] : cfg.ablation) {
        for (double v : values) {
            TrainConfig t = train_config_for(cfg);
            t.loss_weights.*weight_fields().at(name) = v;
            std::string tag = name + "=" + value_label(v);
            ctx.say("training " + tag);
            const std::string file_tag = "ablation_" + name + "_" + value_label(v);
            const TrainedModel m = fit(ctx, setup, mode, t, file_tag);
            save_model_artifacts(ctx, file_tag, m);
            const EvalReport rep = eval_grid(m.model(), setup.test_images, {noise_of(cfg.eval_noise.front())},
                                             ctx.seed, "ablation_lambda");
            if (v == 0.0) tag += ";ablation";
            rows.push_back({"ablation_lambda", tag, "ssim", rep.cells.front().ssim, ctx.seed});
        }
    }
    return rows;
}

std::vector<EvalRow> run_semi(const SeedContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& ss = cfg.semi_supervised;
    const TrainMode mode = TrainMode::rocgan;
    ImageDataConfig data = cfg.data;
    data.train_samples = ss.labelled_count + ss.unlabelled_count;
    const ImageSetup full = make_image_setup(data, mode, ctx.seed);
    ImageSetup labelled = full;
    labelled.train_images = slice_batch(full.train_images, 0, ss.labelled_count);
    const Tensor unlabelled =
        ss.unlabelled_count ? slice_batch(full.train_images, ss.labelled_count, ss.unlabelled_count) : Tensor();
    std::vector<EvalRow> rows;
    const auto grid = grid_of(cfg.eval_noise);
    for (bool semi : {false, true}) {
        const std::string tag = semi ? "semi" : "supervised";
        ctx.say("training " + tag);
        const TrainedModel m = fit(ctx, labelled, mode, train_config_for(cfg), tag, semi ? unlabelled : Tensor());
        save_model_artifacts(ctx, tag, m);
        const EvalReport rep = eval_grid(m.model(), full.test_images, grid, ctx.seed, "semi_supervised/" + tag);
        for (auto& r : rep.rows()) rows.push_back(r);
    }
    return rows;
}

std::vector<EvalRow> run_seed(const SeedContext& ctx) {
    const std::string& e = ctx.cfg.experiment;
    if (e == "synthetic") return run_synthetic(ctx);
    if (e == "theory") return run_theory(ctx);
    if (e == "linear_analogy") return run_linear_analogy(ctx);
    if (e == "fgsm") return run_fgsm(ctx);
    if (e == "ablation_lambda") return run_ablation(ctx);
    if (e == "semi_supervised") return run_semi(ctx);
    return run_image_grid(ctx);  // image_denoise, image_inpaint, robustness_grid
}

}  // namespace

std::vector<EvalRow> run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    std::ofstream(dir / "config.resolved.json") << cfg.to_json().dump(2) << '\n';

    std::mutex log_mutex;
    std::vector<std::vector<EvalRow>> per_seed(cfg.seeds.size());
    std::vector<std::exception_ptr> errors(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
            try {
                const SeedContext ctx{cfg, cfg.seeds[i], dir, log, &log_mutex};
                ctx.say("start " + cfg.experiment);
                per_seed[i] = run_seed(ctx);
                ctx.say("done, " + std::to_string(per_seed[i].size()) + " metric rows");
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(worker_threads(), cfg.seeds.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<EvalRow> rows;
    for (auto& r : per_seed) rows.insert(rows.end(), r.begin(), r.end());
    write_eval_csv(rows, (dir / "metrics.csv").string());
    if (log) *log << "wrote " << (dir / "metrics.csv").string() << std::endl;
    return rows;
}

}  // namespace rocgan
