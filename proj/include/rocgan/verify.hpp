#pragma once

#include <functional>
#include <string>
#include <vector>

namespace rocgan {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;  // 0: no runtime limit
};

// "fast", "synthetic", "shared", "images" or "all".
std::vector<int> criterion_group(const std::string& group);

struct VerifyOptions {
    std::string work_dir = "verify_out";  // checkpoints and scratch files
};

using CriterionSink = std::function<void(const CriterionResult&)>;

// Runs the listed acceptance criteria in order, reporting each one as it finishes.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids, const VerifyOptions& options,
                                            const CriterionSink& sink = {});

// "PASS [3] synthetic ...: detail (12.3 s / 600 s)"
std::string format_criterion(const CriterionResult& r);

}  // namespace rocgan
