#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rocgan/tensor.hpp"

namespace rocgan {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Central differences with step h against backward() on every input.
// The error per input is ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||, floor).
struct GradCheckResult {
    double max_rel_error = 0.0;
    std::vector<double> per_input;
};

GradCheckResult gradcheck(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-5, double floor = 1e-8);

// Reduces any tensor to a scalar through a fixed random projection, so every
// output element contributes to the checked gradient.
Tensor random_projection(const Tensor& out, std::uint64_t seed);

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);
// Same, but |x| >= margin everywhere (keeps samples off kinks at 0).
Tensor random_tensor_away_from_zero(Shape shape, std::uint64_t seed, double margin = 0.05);

struct OpCheck {
    std::string name;
    std::size_t trials = 0;
    double max_rel_error = 0.0;
};

// Every differentiable op and loss term, `trials` random instances each.
std::vector<OpCheck> run_gradient_suite(std::size_t trials = 10, std::uint64_t seed = 0, double h = 1e-5);

}  // namespace rocgan
