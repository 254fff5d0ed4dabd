#include "rocgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "rocgan/errors.hpp"

namespace rocgan {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<detail::Node>;

void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

void detail::Node::accumulate(std::span<const double> g) {
    if (!requires_grad) return;
    auto buf = grad_buffer();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

std::span<double> detail::Node::grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
}

bool grad_enabled() { return g_grad_enabled; }

Tensor detail::make_op(Shape shape, std::vector<double> data, std::vector<std::shared_ptr<Node>> inputs,
                       std::function<void(Node&)> backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    bool needs = false;
    if (g_grad_enabled)
        for (auto& in : inputs) needs = needs || in->requires_grad;
    if (needs) {
        node->requires_grad = true;
        node->inputs = std::move(inputs);
        node->backward_fn = std::move(backward);
    }
    return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---------------------------------------------------------------------------
// Tensor handle

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    for (auto d : shape) require(d > 0, "tensor dimensions must be positive: " + shape_str(shape));
    auto node = std::make_shared<detail::Node>();
    node->data.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    for (auto d : shape) require(d > 0, "tensor dimensions must be positive: " + shape_str(shape));
    require(shape_numel(shape) == data.size(),
            "data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
    require(defined(), "undefined tensor");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    require(axis < rank(), "axis out of range");
    return node_->shape[axis];
}

std::size_t Tensor::numel() const { return defined() ? node_->data.size() : 0; }
std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
    require(numel() == 1, "item() on tensor with " + std::to_string(numel()) + " elements");
    return node_->data[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
bool Tensor::has_grad() const { return defined() && node_->grad.size() == node_->data.size(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
    if (defined()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    auto node = std::make_shared<detail::Node>();
    node->shape = node_->shape;
    node->data = node_->data;
    return Tensor(std::move(node));
}

Tensor Tensor::clone() const {
    Tensor t = detach();
    t.node_->requires_grad = node_->requires_grad;
    return t;
}

void Tensor::backward() const {
    require(defined(), "backward on undefined tensor");
    require(numel() == 1, "backward requires a scalar loss, got shape " + shape_str(shape()));
    Tape::record(*this).run_backward();
}

// ---------------------------------------------------------------------------
// Tape

Tape Tape::record(const Tensor& root) {
    Tape tape;
    if (!root.requires_grad()) return tape;
    std::unordered_set<const detail::Node*> visited;
    // Iterative post-order DFS.
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            NodePtr child = node->inputs[next++];
            if (child->requires_grad && visited.insert(child.get()).second) stack.emplace_back(child, 0);
        } else {
            tape.nodes_.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

void Tape::run_backward() {
    if (nodes_.empty()) return;
    for (auto& n : nodes_)
        if (!n->is_leaf()) std::fill(n->grad_buffer().begin(), n->grad_buffer().end(), 0.0);
    nodes_.back()->grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        detail::Node& n = **it;
        if (!n.is_leaf()) n.backward_fn(n);
    }
    for (auto& n : nodes_)
        if (!n->is_leaf()) std::vector<double>().swap(n->grad);
}

// ---------------------------------------------------------------------------
// Op plumbing

namespace {

using detail::make_op;

template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
    const auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return make_op(a.shape(), std::move(out), {a.node()}, [df](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(in.data[i], self.data[i]);
    });
}

enum class Bin { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, Bin op) {
    const std::size_t na = a.numel(), nb = b.numel();
    const bool same = a.shape() == b.shape();
    if (!same && na != 1 && nb != 1)
        throw ContractError("shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const Shape out_shape = (same || nb == 1) ? a.shape() : b.shape();
    const std::size_t n = std::max(na, nb);
    const auto x = a.data();
    const auto y = b.data();
    const std::size_t sa = na == 1 ? 0 : 1, sb = nb == 1 ? 0 : 1;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = x[i * sa], v = y[i * sb];
        out[i] = op == Bin::add ? u + v : op == Bin::sub ? u - v : u * v;
    }
    return make_op(out_shape, std::move(out), {a.node(), b.node()}, [op, sa, sb, n](detail::Node& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        if (A.requires_grad) {
            auto g = A.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) g[i * sa] += op == Bin::mul ? self.grad[i] * B.data[i * sb] : self.grad[i];
        }
        if (B.requires_grad) {
            auto g = B.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const double d = op == Bin::mul ? A.data[i * sa] : op == Bin::sub ? -1.0 : 1.0;
                g[i * sb] += self.grad[i] * d;
            }
        }
    });
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double stable_log_sigmoid(double v) { return v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v)); }

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Bin::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Bin::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Bin::mul); }

Tensor add(const Tensor& a, double b) {
    return unary(a, [b](double x) { return x + b; }, [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, double b) {
    return unary(a, [b](double x) { return x * b; }, [b](double, double) { return b; });
}

Tensor neg(const Tensor& a) { return mul(a, -1.0); }

Tensor abs(const Tensor& a) {
    return unary(a, [](double x) { return std::fabs(x); }, [](double x, double) { return sgn(x); });
}

Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    for (double v : a.data())
        if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary(
        a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sign(const Tensor& a) {
    return unary(a, sgn, [](double, double) { return 0.0; });
}

Tensor log_sigmoid(const Tensor& a) {
    return unary(a, stable_log_sigmoid, [](double x, double) { return 1.0 - stable_sigmoid(x); });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_op({}, {s}, {a.node()}, [](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        const double g = self.grad[0];
        for (double& v : in.grad_buffer()) v += g;
    });
}

Tensor mean(const Tensor& a) { return mul(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, Shape shape) {
    require(shape_numel(shape) == a.numel(),
            "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_op(std::move(shape), std::move(out), {a.node()}, [](detail::Node& self) {
        self.inputs[0]->accumulate(self.grad);
    });
}

Tensor transpose(const Tensor& a) {
    require(a.rank() == 2, "transpose expects a matrix, got " + shape_str(a.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1);
    const auto x = a.data();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
    return make_op({n, m}, std::move(out), {a.node()}, [m, n](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto g = in.grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.rank() >= 2 && a.rank() == b.rank(), "concat_channels: rank mismatch");
    require(a.dim(0) == b.dim(0), "concat_channels: batch mismatch");
    for (std::size_t d = 2; d < a.rank(); ++d)
        require(a.dim(d) == b.dim(d), "concat_channels: spatial mismatch " + shape_str(a.shape()) + " vs " +
                                          shape_str(b.shape()));
    const std::size_t n = a.dim(0);
    const std::size_t inner = a.numel() / (n * a.dim(1));
    const std::size_t ba = a.dim(1) * inner, bb = b.dim(1) * inner;
    Shape shape = a.shape();
    shape[1] = a.dim(1) + b.dim(1);
    std::vector<double> out(n * (ba + bb));
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.data().begin() + i * ba, ba, out.begin() + i * (ba + bb));
        std::copy_n(b.data().begin() + i * bb, bb, out.begin() + i * (ba + bb) + ba);
    }
    return make_op(std::move(shape), std::move(out), {a.node(), b.node()}, [n, ba, bb](detail::Node& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        for (std::size_t i = 0; i < n; ++i) {
            const double* g = self.grad.data() + i * (ba + bb);
            if (A.requires_grad) {
                double* ga = A.grad_buffer().data() + i * ba;
                for (std::size_t k = 0; k < ba; ++k) ga[k] += g[k];
            }
            if (B.requires_grad) {
                double* gb = B.grad_buffer().data() + i * bb;
                for (std::size_t k = 0; k < bb; ++k) gb[k] += g[ba + k];
            }
        }
    });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    require(x.rank() >= 2, "add_channel_bias expects N x C x ...");
    require(bias.numel() == x.dim(1), "bias length does not match channel count");
    const std::size_t n = x.dim(0), c = x.dim(1), inner = x.numel() / (n * c);
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto b = bias.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            double* p = out.data() + (i * c + ch) * inner;
            for (std::size_t k = 0; k < inner; ++k) p[k] += b[ch];
        }
    return make_op(x.shape(), std::move(out), {x.node(), bias.node()}, [n, c, inner](detail::Node& self) {
        self.inputs[0]->accumulate(self.grad);
        auto& B = *self.inputs[1];
        if (!B.requires_grad) return;
        auto gb = B.grad_buffer();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double* g = self.grad.data() + (i * c + ch) * inner;
                double s = 0.0;
                for (std::size_t k = 0; k < inner; ++k) s += g[k];
                gb[ch] += s;
            }
    });
}

// ---------------------------------------------------------------------------
// Batch normalization

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, NormMode mode,
                  double momentum, double eps) {
    require(x.rank() >= 2, "batch_norm expects N x C x ..., got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1), inner = x.numel() / (n * c);
    require(gamma.numel() == c && beta.numel() == c, "batch_norm: gamma/beta length must equal channel count");
    if (!stats.running_mean.defined() || stats.running_mean.numel() != c) {
        stats.running_mean = Tensor::zeros({c});
        stats.running_var = Tensor::full({c}, 1.0);
    }
    auto run_mean = stats.running_mean.mutable_data();
    auto run_var = stats.running_var.mutable_data();
    const std::size_t m = n * inner;
    const auto xs = x.data();
    std::vector<double> mu(c), inv_std(c);
    if (mode == NormMode::train) {
        if (n < 2) throw ContractError("batch_norm in train mode requires N >= 2, got N = " + std::to_string(n));
        for (std::size_t ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = xs.data() + (i * c + ch) * inner;
                for (std::size_t k = 0; k < inner; ++k) s += p[k];
            }
            const double mean_c = s / static_cast<double>(m);
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = xs.data() + (i * c + ch) * inner;
                for (std::size_t k = 0; k < inner; ++k) v += (p[k] - mean_c) * (p[k] - mean_c);
            }
            const double var_c = v / static_cast<double>(m);
            mu[ch] = mean_c;
            inv_std[ch] = 1.0 / std::sqrt(var_c + eps);
            run_mean[ch] = (1.0 - momentum) * run_mean[ch] + momentum * mean_c;
            const double unbiased = m > 1 ? var_c * static_cast<double>(m) / static_cast<double>(m - 1) : var_c;
            run_var[ch] = (1.0 - momentum) * run_var[ch] + momentum * unbiased;
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mu[ch] = run_mean[ch];
            inv_std[ch] = 1.0 / std::sqrt(run_var[ch] + eps);
        }
    }
    const auto gm = gamma.data();
    const auto bt = beta.data();
    std::vector<double> xhat(x.numel()), out(x.numel());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (i * c + ch) * inner;
            for (std::size_t k = 0; k < inner; ++k) {
                const double h = (xs[off + k] - mu[ch]) * inv_std[ch];
                xhat[off + k] = h;
                out[off + k] = gm[ch] * h + bt[ch];
            }
        }
    const bool train = mode == NormMode::train;
    return make_op(
        x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
        [n, c, inner, m, train, xhat = std::move(xhat), inv_std = std::move(inv_std),
         gamma_v = std::vector<double>(gm.begin(), gm.end())](detail::Node& self) {
            auto& X = *self.inputs[0];
            auto& G = *self.inputs[1];
            auto& B = *self.inputs[2];
            const double* g = self.grad.data();
            std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t off = (i * c + ch) * inner;
                    for (std::size_t k = 0; k < inner; ++k) {
                        sum_g[ch] += g[off + k];
                        sum_gx[ch] += g[off + k] * xhat[off + k];
                    }
                }
            if (G.requires_grad) {
                auto gg = G.grad_buffer();
                for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_gx[ch];
            }
            if (B.requires_grad) {
                auto gb = B.grad_buffer();
                for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
            }
            if (!X.requires_grad) return;
            auto gx = X.grad_buffer();
            const double inv_m = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t off = (i * c + ch) * inner;
                    const double scale = gamma_v[ch] * inv_std[ch];
                    for (std::size_t k = 0; k < inner; ++k) {
                        if (train)
                            gx[off + k] +=
                                scale * (g[off + k] - inv_m * sum_g[ch] - xhat[off + k] * inv_m * sum_gx[ch]);
                        else
                            gx[off + k] += scale * g[off + k];
                    }
                }
        });
}

}  // namespace rocgan
