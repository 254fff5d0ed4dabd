#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rocgan_lab/rocgan_lab.h"

namespace {

void print_line(const char* line, void*) {
    std::cout << line << std::endl;
}

int report(rl_status st) {
    if (st != RL_OK) std::cerr << rl_last_error_json() << std::endl;
    return static_cast<int>(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RoCGAN desk-scale experiment runner"};
    app.require_subcommand(1);
    app.set_version_flag("--version", rl_version());

    std::string config_path;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run an experiment config (metrics.csv, checkpoints, plots)");
    run->add_option("config", config_path, "JSON experiment config")->required();
    run->add_flag("-q,--quiet", quiet, "No progress lines");

    std::string csv, kind, svg;
    auto* plot = app.add_subcommand("plot", "Render a CSV as a deterministic SVG");
    plot->add_option("csv", csv, "Input CSV")->required();
    plot->add_option("--kind", kind, "curve, histogram or manifold3d")->required();
    plot->add_option("-o,--output", svg, "Output SVG")->required();

    std::string group = "all", work_dir = "verify_out";
    auto* verify = app.add_subcommand("verify", "Run the acceptance suite, one PASS/FAIL line per criterion");
    verify->add_option("--group", group, "fast, synthetic, shared, images or all")->capture_default_str();
    verify->add_option("--work-dir", work_dir, "Scratch directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (*run) {
        rl_config* cfg = nullptr;
        if (rl_status st = rl_config_load(config_path.c_str(), &cfg); st != RL_OK) return report(st);
        const rl_status st = rl_run(cfg, quiet ? nullptr : print_line, nullptr);
        rl_config_free(cfg);
        return report(st);
    }
    if (*plot) return report(rl_plot(csv.c_str(), kind.c_str(), svg.c_str()));

    int failed = 0;
    if (rl_status st = rl_verify(group.c_str(), work_dir.c_str(), print_line, nullptr, &failed); st != RL_OK)
        return report(st);
    std::cout << (failed ? "FAILED: " + std::to_string(failed) + " criteria" : std::string("ALL PASSED")) << std::endl;
    return failed ? 1 : 0;
}
