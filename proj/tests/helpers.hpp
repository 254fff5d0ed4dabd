#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "rocgan/tensor.hpp"

namespace rocgan::test {

// Closed-form sequences shared with tests/oracle/fixtures.py.
inline Tensor seq(Shape shape, const std::function<double(double)>& f) {
    std::vector<double> d(shape_numel(shape));
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = f(static_cast<double>(i));
    return Tensor::from(std::move(shape), std::move(d));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace rocgan::test
