#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rocgan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads `grad` of the owning node and accumulates into the inputs.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    void accumulate(std::span<const double> g);
    std::span<double> grad_buffer();
};

// Builds an op result; records `backward` only when grad mode is on and some
// input requires a gradient.
Tensor make_op(Shape shape, std::vector<double> data, std::vector<std::shared_ptr<Node>> inputs,
               std::function<void(Node&)> backward);
}  // namespace detail

/// Dense row-major f64 array and a node of the reverse-mode graph.
///
/// Copies are shallow: two copies of a Tensor refer to the same storage and
/// gradient, which is how parameter aliasing is expressed. Use `clone()` for a
/// deep copy and `detach()` to cut the graph.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double operator[](std::size_t i) const { return data()[i]; }

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    /// Gradient of this scalar w.r.t. every requires_grad leaf, accumulated
    /// into the leaves' existing gradients.
    void backward() const;

    Tensor detach() const;
    Tensor clone() const;
    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered nodes reachable from a root; inputs precede users.
class Tape {
public:
    static Tape record(const Tensor& root);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<std::shared_ptr<detail::Node>>& nodes() const { return nodes_; }
    // Seeds d(root)/d(root) = 1 and runs every backward rule in reverse order.
    void run_backward();

private:
    std::vector<std::shared_ptr<detail::Node>> nodes_;
};

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Elementwise. Binary ops require equal shapes unless one side has one element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sign(const Tensor& a);
// log(sigmoid(a)) without overflow for large |a|.
Tensor log_sigmoid(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Reductions to a one-element tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// Concatenation along axis 1 of N x C x ... tensors.
Tensor concat_channels(const Tensor& a, const Tensor& b);
// x: N x C x ..., bias: C.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// x: N x C x H x W, kernel: F x C x kh x kw. Bias-free cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t padding);

// Adjoint of conv2d. x: N x C_in x H x W, kernel: C_in x C_out x kh x kw, i.e.
// the same kernel tensor that maps C_out -> C_in in conv2d. Output size is
// (H - 1) * stride - 2 * padding + kh + output_padding, output_padding < stride.
Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, std::size_t stride,
                        std::size_t padding, std::size_t output_padding = 0);

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding);
std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                       std::size_t padding, std::size_t output_padding);

enum class NormMode { train, eval };

// Running statistics; Tensor handles so aliased layers share them.
struct BatchNormStats {
    Tensor running_mean;
    Tensor running_var;
};

// Per-channel normalization over N and all trailing axes. Train mode needs N >= 2,
// uses batch statistics and updates `stats` in place; eval mode reads `stats`.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  NormMode mode, double momentum = 0.1, double eps = 1e-5);

}  // namespace rocgan
