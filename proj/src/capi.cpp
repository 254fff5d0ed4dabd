#include "rocgan_lab/rocgan_lab.h"

#include <filesystem>
#include <fstream>
#include <memory>
#include <streambuf>
#include <string>

#include <json.hpp>

#include "rocgan/data.hpp"
#include "rocgan/errors.hpp"
#include "rocgan/eval.hpp"
#include "rocgan/experiments.hpp"
#include "rocgan/plot.hpp"
#include "rocgan/tensor_io.hpp"
#include "rocgan/verify.hpp"

struct rl_config {
    rocgan::ExperimentConfig cfg;
    std::string resolved;
};

struct rl_tensor {
    rocgan::Tensor t;
};

namespace {

struct LastError {
    rl_status status = RL_OK;
    std::string message, field, json;
    std::uint64_t seed = 0;
};

thread_local LastError g_error;

rl_status fail(rl_status status, const std::string& message, const std::string& field = "", std::uint64_t seed = 0) {
    g_error.status = status;
    g_error.message = message;
    g_error.field = field;
    g_error.seed = seed;
    nlohmann::json j = {{"status", static_cast<int>(status)}, {"message", message}};
    if (!field.empty()) j["field"] = field;
    if (status == RL_ERR_DIVERGENCE) j["seed"] = seed;
    g_error.json = j.dump();
    return status;
}

// Maps the library's exception types onto status codes.
template <class F>
rl_status guarded(F&& f) {
    try {
        f();
        return RL_OK;
    } catch (const rocgan::ConfigError& e) {
        return fail(RL_ERR_CONFIG, e.what(), e.field());
    } catch (const rocgan::DivergenceError& e) {
        return fail(RL_ERR_DIVERGENCE, std::string(e.what()) + " (term " + e.term() + ")", "", e.seed());
    } catch (const rocgan::FormatError& e) {
        return fail(RL_ERR_IO, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(RL_ERR_IO, e.what());
    } catch (const std::ios_base::failure& e) {
        return fail(RL_ERR_IO, e.what());
    } catch (const rocgan::ContractError& e) {
        return fail(RL_ERR_CONTRACT, e.what());
    } catch (const rocgan::DomainError& e) {
        return fail(RL_ERR_CONTRACT, e.what());
    } catch (const std::exception& e) {
        return fail(RL_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(RL_ERR_INTERNAL, "unknown error");
    }
}

rl_status null_arg(const char* name) { return fail(RL_ERR_CONTRACT, std::string(name) + " must not be null"); }

// Forwards complete lines to a C callback.
class LineBuf : public std::streambuf {
public:
    LineBuf(rl_line_fn fn, void* user) : fn_(fn), user_(user) {}
    ~LineBuf() override {
        if (!line_.empty()) emit();
    }

protected:
    int overflow(int ch) override {
        if (ch == traits_type::eof()) return 0;
        if (ch == '\n') emit();
        else line_.push_back(static_cast<char>(ch));
        return ch;
    }

private:
    void emit() {
        if (fn_) fn_(line_.c_str(), user_);
        line_.clear();
    }
    rl_line_fn fn_;
    void* user_;
    std::string line_;
};

}  // namespace

extern "C" {

const char* rl_last_error_message(void) { return g_error.message.c_str(); }
const char* rl_last_error_field(void) { return g_error.field.c_str(); }
uint64_t rl_last_error_seed(void) { return g_error.seed; }
const char* rl_last_error_json(void) { return g_error.json.c_str(); }
const char* rl_version(void) { return "0.1.0"; }

rl_status rl_config_load(const char* path, rl_config** out) {
    if (!path || !out) return null_arg("path/out");
    return guarded([&] { *out = new rl_config{rocgan::load_config(path), {}}; });
}

rl_status rl_config_from_json(const char* json, rl_config** out) {
    if (!json || !out) return null_arg("json/out");
    return guarded([&] {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json);
        } catch (const nlohmann::json::exception& e) {
            throw rocgan::ConfigError("/", std::string("invalid JSON: ") + e.what());
        }
        *out = new rl_config{rocgan::parse_config(j), {}};
    });
}

rl_status rl_config_resolved_json(rl_config* cfg, const char** out) {
    if (!cfg || !out) return null_arg("cfg/out");
    return guarded([&] {
        cfg->resolved = cfg->cfg.to_json().dump(2);
        *out = cfg->resolved.c_str();
    });
}

void rl_config_free(rl_config* cfg) { delete cfg; }

rl_status rl_run(const rl_config* cfg, rl_line_fn on_line, void* user) {
    if (!cfg) return null_arg("cfg");
    const rl_status st = guarded([&] {
        LineBuf buf(on_line, user);
        std::ostream log(&buf);
        rocgan::run_experiment(cfg->cfg, on_line ? &log : nullptr);
    });
    if (st != RL_OK) {
        std::error_code ec;
        std::filesystem::create_directories(cfg->cfg.output_dir, ec);
        std::ofstream(std::filesystem::path(cfg->cfg.output_dir) / "error.json") << g_error.json << '\n';
    }
    return st;
}

rl_status rl_plot(const char* csv_path, const char* kind, const char* svg_path) {
    if (!csv_path || !kind || !svg_path) return null_arg("csv_path/kind/svg_path");
    try {
        const rocgan::PlotKind k = rocgan::parse_plot_kind(kind);
        rocgan::plot_csv(csv_path, k, svg_path);
        return RL_OK;
    } catch (const rocgan::FormatError& e) {
        return fail(RL_ERR_CONFIG, e.what(), "csv");
    } catch (const rocgan::ContractError& e) {
        return fail(RL_ERR_CONFIG, e.what(), "kind");
    } catch (const std::exception& e) {
        return fail(RL_ERR_INTERNAL, e.what());
    }
}

rl_status rl_verify(const char* group, const char* work_dir, rl_line_fn on_line, void* user, int* failed) {
    if (!group) return null_arg("group");
    return guarded([&] {
        rocgan::VerifyOptions opt;
        if (work_dir) opt.work_dir = work_dir;
        int bad = 0;
        rocgan::run_acceptance(rocgan::criterion_group(group), opt, [&](const rocgan::CriterionResult& r) {
            bad += !r.pass;
            if (on_line) on_line(rocgan::format_criterion(r).c_str(), user);
        });
        if (failed) *failed = bad;
    });
}

rl_status rl_tensor_create(const size_t* shape, size_t rank, const double* data, rl_tensor** out) {
    if ((!shape && rank) || !data || !out) return null_arg("shape/data/out");
    return guarded([&] {
        rocgan::Shape s(shape, shape + rank);
        const std::size_t n = rocgan::shape_numel(s);
        *out = new rl_tensor{rocgan::Tensor::from(std::move(s), std::vector<double>(data, data + n))};
    });
}

size_t rl_tensor_rank(const rl_tensor* t) { return t ? t->t.rank() : 0; }
size_t rl_tensor_dim(const rl_tensor* t, size_t axis) { return t && axis < t->t.rank() ? t->t.dim(axis) : 0; }
size_t rl_tensor_numel(const rl_tensor* t) { return t ? t->t.numel() : 0; }
const double* rl_tensor_data(const rl_tensor* t) { return t ? t->t.data().data() : nullptr; }

rl_status rl_tensor_read(const char* path, rl_tensor** out) {
    if (!path || !out) return null_arg("path/out");
    return guarded([&] { *out = new rl_tensor{rocgan::read_tensor(path)}; });
}

rl_status rl_tensor_write(const char* path, const rl_tensor* t, int dtype) {
    if (!path || !t) return null_arg("path/t");
    if (dtype != 1 && dtype != 2) return fail(RL_ERR_CONTRACT, "dtype must be 1 (f32) or 2 (f64)");
    return guarded([&] { rocgan::write_tensor(path, t->t, static_cast<rocgan::DType>(dtype)); });
}

void rl_tensor_free(rl_tensor* t) { delete t; }

rl_status rl_ssim(const rl_tensor* a, const rl_tensor* b, double* out) {
    if (!a || !b || !out) return null_arg("a/b/out");
    return guarded([&] { *out = rocgan::ssim(a->t, b->t); });
}

rl_status rl_corrupt(const rl_tensor* img, const char* label, uint64_t seed, rl_tensor** out) {
    if (!img || !label || !out) return null_arg("img/label/out");
    return guarded([&] {
        const auto spec = rocgan::CorruptionSpec::parse(label, seed);
        *out = new rl_tensor{rocgan::corrupt(img->t, spec)};
    });
}

}  // extern "C"
