// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "rocgan_lab/rocgan_lab.h"

namespace fs = std::filesystem;

namespace {

void collect(const char* line, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(line); }

}  // namespace

TEST_CASE("config errors report status, field and JSON") {
    rl_config* cfg = nullptr;
    CHECK(rl_config_from_json(R"({"experiment": "nope"})", &cfg) == RL_ERR_CONFIG);
    CHECK(cfg == nullptr);
    CHECK(std::string(rl_last_error_field()) == "experiment");
    CHECK(std::string(rl_last_error_json()).find("\"field\":\"experiment\"") != std::string::npos);
    CHECK(rl_config_from_json("{not json", &cfg) == RL_ERR_CONFIG);
    CHECK(rl_config_load("/nonexistent/config.json", &cfg) == RL_ERR_CONFIG);
    CHECK(rl_config_from_json(nullptr, &cfg) == RL_ERR_CONTRACT);
}

TEST_CASE("resolved config and a theory run") {
    const fs::path out = fs::temp_directory_path() / "rocgan_capi_theory";
    fs::remove_all(out);
    const std::string json =
        R"({"experiment": "theory", "theory": {"distributions": 5}, "output_dir": ")" + out.string() + "\"}";
    rl_config* cfg = nullptr;
    REQUIRE(rl_config_from_json(json.c_str(), &cfg) == RL_OK);
    const char* resolved = nullptr;
    REQUIRE(rl_config_resolved_json(cfg, &resolved) == RL_OK);
    CHECK(std::string(resolved).find("\"learning_rate\"") != std::string::npos);
    std::vector<std::string> lines;
    CHECK(rl_run(cfg, collect, &lines) == RL_OK);
    CHECK_FALSE(lines.empty());
    CHECK(fs::exists(out / "metrics.csv"));
    rl_config_free(cfg);
    fs::remove_all(out);
}

TEST_CASE("tensors, ssim and corruption") {
    const size_t shape[] = {1, 12, 12};
    std::vector<double> zeros(144, 0.0), ones(144, 1.0);
    rl_tensor *a = nullptr, *b = nullptr, *c = nullptr;
    REQUIRE(rl_tensor_create(shape, 3, zeros.data(), &a) == RL_OK);
    REQUIRE(rl_tensor_create(shape, 3, ones.data(), &b) == RL_OK);
    CHECK(rl_tensor_rank(a) == 3);
    CHECK(rl_tensor_dim(a, 1) == 12);
    CHECK(rl_tensor_dim(a, 7) == 0);
    CHECK(rl_tensor_numel(b) == 144);
    double s = 0.0;
    REQUIRE(rl_ssim(a, b, &s) == RL_OK);
    CHECK(std::abs(s - 9.999000099992464e-05) < 1e-15);
    REQUIRE(rl_corrupt(b, "100/0", 1, &c) == RL_OK);
    for (size_t i = 0; i < 144; ++i) CHECK(rl_tensor_data(c)[i] == 0.0);
    rl_tensor* bad = nullptr;
    CHECK(rl_corrupt(b, "abc", 1, &bad) != RL_OK);

    const fs::path p = fs::temp_directory_path() / "rocgan_capi.tnsr";
    REQUIRE(rl_tensor_write(p.string().c_str(), b, 1) == RL_OK);
    CHECK(rl_tensor_write(p.string().c_str(), b, 3) == RL_ERR_CONTRACT);
    rl_tensor* back = nullptr;
    REQUIRE(rl_tensor_read(p.string().c_str(), &back) == RL_OK);
    CHECK(std::memcmp(rl_tensor_data(back), ones.data(), 144 * sizeof(double)) == 0);
    CHECK(rl_tensor_read("/nonexistent.tnsr", &bad) == RL_ERR_IO);
    for (rl_tensor* t : {a, b, c, back}) rl_tensor_free(t);
    fs::remove(p);
}

TEST_CASE("plot schema errors map to the config status") {
    const fs::path dir = fs::temp_directory_path() / "rocgan_capi_plot";
    fs::create_directories(dir);
    std::FILE* f = std::fopen((dir / "bad.csv").string().c_str(), "w");
    std::fputs("a,b\n1,2\n", f);
    std::fclose(f);
    CHECK(rl_plot((dir / "bad.csv").string().c_str(), "histogram", (dir / "x.svg").string().c_str()) ==
          RL_ERR_CONFIG);
    CHECK(rl_plot((dir / "bad.csv").string().c_str(), "pie", (dir / "x.svg").string().c_str()) == RL_ERR_CONFIG);
    CHECK(std::string(rl_last_error_field()) == "kind");
    fs::remove_all(dir);
}

TEST_CASE("unknown verify group") {
    int failed = -1;
    CHECK(rl_verify("everything", nullptr, nullptr, nullptr, &failed) == RL_ERR_CONTRACT);
    CHECK(std::strlen(rl_version()) > 0);
}
