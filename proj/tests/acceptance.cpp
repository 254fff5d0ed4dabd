// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rocgan/verify.hpp"

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string group = "all", work_dir = "acceptance_out";
    app.add_option("--group", group, "fast, synthetic, shared, images or all");
    app.add_option("--work-dir", work_dir, "scratch directory");
    CLI11_PARSE(app, argc, argv);

    rocgan::VerifyOptions opt;
    opt.work_dir = work_dir;
    int failed = 0;
    rocgan::run_acceptance(rocgan::criterion_group(group), opt, [&](const rocgan::CriterionResult& r) {
        failed += !r.pass;
        std::cout << rocgan::format_criterion(r) << std::endl;
    });
    return failed ? 1 : 0;
}
