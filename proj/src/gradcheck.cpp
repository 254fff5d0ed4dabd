#include "rocgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rocgan/errors.hpp"
#include "rocgan/losses.hpp"
#include "rocgan/rng.hpp"

namespace rocgan {

namespace {

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

GradCheckResult gradcheck(const ScalarFn& f, const std::vector<Tensor>& inputs, double h, double floor) {
    std::vector<Tensor> xs;
    for (const auto& t : inputs) {
        Tensor c = t.detach().clone();
        c.set_requires_grad(true);
        xs.push_back(c);
    }
    const Tensor out = f(xs);
    if (out.numel() != 1) throw ContractError("gradcheck: function must return a scalar");
    out.backward();

    GradCheckResult res;
    for (auto& x : xs) {
        std::vector<double> analytic(x.numel(), 0.0);
        if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
        std::vector<double> numeric(x.numel());
        {
            NoGradGuard ng;
            auto data = x.mutable_data();
            for (std::size_t i = 0; i < x.numel(); ++i) {
                const double orig = data[i];
                data[i] = orig + h;
                const double up = f(xs).item();
                data[i] = orig - h;
                const double down = f(xs).item();
                data[i] = orig;
                numeric[i] = (up - down) / (2.0 * h);
            }
        }
        std::vector<double> diff(numeric.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
        const double err = norm(diff) / std::max({norm(analytic), norm(numeric), floor});
        res.per_input.push_back(err);
        res.max_rel_error = std::max(res.max_rel_error, err);
    }
    return res;
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo, double hi) {
    SplitMix64 rng(seed);
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) v = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(d));
}

Tensor random_tensor_away_from_zero(Shape shape, std::uint64_t seed, double margin) {
    SplitMix64 rng(seed);
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) {
        const double m = rng.uniform(margin, 1.0);
        v = rng.uniform() < 0.5 ? -m : m;
    }
    return Tensor::from(std::move(shape), std::move(d));
}

Tensor random_projection(const Tensor& out, std::uint64_t seed) {
    if (out.numel() == 1) return reshape(out, {});
    return sum(mul(out, random_tensor(out.shape(), derive_seed(seed, "projection"))));
}

namespace {

struct Case {
    std::string name;
    // Builds the inputs for one trial and the function under test.
    std::function<std::pair<std::vector<Tensor>, ScalarFn>(std::uint64_t)> make;
};

ScalarFn projected(std::function<Tensor(const std::vector<Tensor>&)> op, std::uint64_t seed) {
    return [op = std::move(op), seed](const std::vector<Tensor>& x) { return random_projection(op(x), seed); };
}

Case unary(const std::string& name, Tensor (*op)(const Tensor&), double lo = -1.0, double hi = 1.0,
           bool off_kink = false) {
    return {name, [=](std::uint64_t s) {
                Tensor x = off_kink ? random_tensor_away_from_zero({3, 4}, s) : random_tensor({3, 4}, s, lo, hi);
                return std::pair{std::vector<Tensor>{x}, projected([op](const auto& v) { return op(v[0]); }, s)};
            }};
}

Case binary(const std::string& name, Tensor (*op)(const Tensor&, const Tensor&)) {
    return {name, [=](std::uint64_t s) {
                return std::pair{
                    std::vector<Tensor>{random_tensor({2, 3, 2}, s), random_tensor({2, 3, 2}, derive_seed(s, 1))},
                    projected([op](const auto& v) { return op(v[0], v[1]); }, s)};
            }};
}

// Pairs separated by at least `margin` elementwise, for l1-type losses.
std::vector<Tensor> separated_pair(Shape shape, std::uint64_t s) {
    Tensor a = random_tensor(shape, s);
    Tensor gap = random_tensor_away_from_zero(shape, derive_seed(s, 1));
    return {a, add(a, gap).detach()};
}

std::vector<Case> cases() {
    std::vector<Case> c;
    c.push_back(binary("add", add));
    c.push_back(binary("sub", sub));
    c.push_back(binary("mul", mul));
    c.push_back({"add_scalar", [](std::uint64_t s) {
                     return std::pair{std::vector<Tensor>{random_tensor({4}, s), random_tensor({1}, derive_seed(s, 1))},
                                      projected([](const auto& v) { return add(v[0], v[1]); }, s)};
                 }});
    c.push_back({"mul_scalar", [](std::uint64_t s) {
                     return std::pair{std::vector<Tensor>{random_tensor({4}, s)},
                                      projected([](const auto& v) { return mul(v[0], -1.7); }, s)};
                 }});
    c.push_back(unary("neg", neg));
    c.push_back(unary("abs", abs, -1, 1, true));
    c.push_back(unary("exp", exp));
    c.push_back(unary("log", log, 0.2, 3.0));
    c.push_back(unary("square", square));
    c.push_back(unary("relu", relu, -1, 1, true));
    c.push_back(unary("leaky_relu", [](const Tensor& a) { return leaky_relu(a, 0.2); }, -1, 1, true));
    c.push_back(unary("sigmoid", sigmoid, -4, 4));
    c.push_back(unary("tanh", tanh, -2, 2));
    c.push_back(unary("sign", sign, -1, 1, true));
    c.push_back(unary("log_sigmoid", log_sigmoid, -8, 8));
    c.push_back(unary("sum", sum));
    c.push_back(unary("mean", mean));
    c.push_back(unary("reshape", [](const Tensor& a) { return reshape(a, {2, 6}); }));
    c.push_back(unary("transpose", transpose));
    c.push_back({"matmul", [](std::uint64_t s) {
                     return std::pair{std::vector<Tensor>{random_tensor({3, 4}, s), random_tensor({4, 2}, derive_seed(s, 1))},
                                      projected([](const auto& v) { return matmul(v[0], v[1]); }, s)};
                 }});
    c.push_back({"concat_channels", [](std::uint64_t s) {
                     return std::pair{
                         std::vector<Tensor>{random_tensor({2, 2, 3, 3}, s), random_tensor({2, 1, 3, 3}, derive_seed(s, 1))},
                         projected([](const auto& v) { return concat_channels(v[0], v[1]); }, s)};
                 }});
    c.push_back({"add_channel_bias", [](std::uint64_t s) {
                     return std::pair{std::vector<Tensor>{random_tensor({2, 3, 2, 2}, s), random_tensor({3}, derive_seed(s, 1))},
                                      projected([](const auto& v) { return add_channel_bias(v[0], v[1]); }, s)};
                 }});
    for (std::size_t stride : {1, 2})
        for (std::size_t pad : {0, 1})
            c.push_back({"conv2d/s" + std::to_string(stride) + "p" + std::to_string(pad), [=](std::uint64_t s) {
                             return std::pair{
                                 std::vector<Tensor>{random_tensor({2, 2, 5, 5}, s), random_tensor({3, 2, 3, 3}, derive_seed(s, 1))},
                                 projected([=](const auto& v) { return conv2d(v[0], v[1], stride, pad); }, s)};
                         }});
    for (std::size_t op : {0, 1})
        c.push_back({"conv_transpose2d/op" + std::to_string(op), [=](std::uint64_t s) {
                         return std::pair{
                             std::vector<Tensor>{random_tensor({2, 2, 3, 3}, s), random_tensor({2, 3, 4, 4}, derive_seed(s, 1))},
                             projected([=](const auto& v) { return conv_transpose2d(v[0], v[1], 2, 1, op); }, s)};
                     }});
    c.push_back({"batch_norm", [](std::uint64_t s) {
                     return std::pair{
                         std::vector<Tensor>{random_tensor({4, 3, 2, 2}, s, -2, 2), random_tensor({3}, derive_seed(s, 1), 0.5, 1.5),
                                             random_tensor({3}, derive_seed(s, 2))},
                         projected(
                             [](const auto& v) {
                                 BatchNormStats st{Tensor::zeros({3}), Tensor::full({3}, 1.0)};
                                 return batch_norm(v[0], v[1], v[2], st, NormMode::train);
                             },
                             s)};
                 }});

    // Loss terms.
    c.push_back({"adv_loss_d", [](std::uint64_t s) {
                     return std::pair{std::vector<Tensor>{random_tensor({4, 1}, s, -3, 3), random_tensor({4, 1}, derive_seed(s, 1), -3, 3)},
                                      ScalarFn([](const auto& v) { return adv_loss_d(v[0], v[1]); })};
                 }});
    for (auto form : {GeneratorAdversarial::non_saturating, GeneratorAdversarial::minimax})
        c.push_back({form == GeneratorAdversarial::minimax ? "adv_loss_g/minimax" : "adv_loss_g/non_saturating",
                     [=](std::uint64_t s) {
                         return std::pair{std::vector<Tensor>{random_tensor({4, 1}, s, -3, 3)},
                                          ScalarFn([=](const auto& v) { return adv_loss_g(v[0], form); })};
                     }});
    c.push_back({"content_loss", [](std::uint64_t s) {
                     return std::pair{separated_pair({2, 3, 2, 2}, s),
                                      ScalarFn([](const auto& v) { return content_loss(v[0], v[1]); })};
                 }});
    c.push_back({"feature_matching_loss", [](std::uint64_t s) {
                     auto p = separated_pair({2, 6}, s);
                     const Tensor target = p[1];
                     return std::pair{std::vector<Tensor>{p[0]},
                                      ScalarFn([target](const auto& v) { return feature_matching_loss(v[0], target); })};
                 }});
    c.push_back({"ae_loss", [](std::uint64_t s) {
                     return std::pair{separated_pair({2, 3, 2, 2}, s),
                                      ScalarFn([](const auto& v) { return ae_loss(v[0], v[1]); })};
                 }});
    c.push_back({"latent_loss", [](std::uint64_t s) {
                     return std::pair{separated_pair({4, 5}, s),
                                      ScalarFn([](const auto& v) { return latent_loss(v[0], v[1]); })};
                 }});
    c.push_back({"l2_mean", [](std::uint64_t s) {
                     return std::pair{std::vector<Tensor>{random_tensor({3, 4}, s), random_tensor({3, 4}, derive_seed(s, 1))},
                                      ScalarFn([](const auto& v) { return l2_mean(v[0], v[1]); })};
                 }});
    c.push_back({"decov_loss", [](std::uint64_t s) {
                     return std::pair{std::vector<Tensor>{random_tensor({5, 2, 2, 1}, s, -2, 2)},
                                      ScalarFn([](const auto& v) { return decov_loss(v[0]); })};
                 }});
    c.push_back({"total_loss_rocgan", [](std::uint64_t s) {
                     // Full objective from raw ingredients: logits, generated/target images, features, codes.
                     std::vector<Tensor> in = {random_tensor({3, 1}, s, -2, 2)};
                     for (auto& t : separated_pair({3, 2, 2, 2}, derive_seed(s, 1))) in.push_back(t);
                     in.push_back(random_tensor({3, 4}, derive_seed(s, 2)));
                     for (auto& t : separated_pair({3, 4}, derive_seed(s, 3))) in.push_back(t);
                     in.push_back(random_tensor({3, 2, 2, 2}, derive_seed(s, 4)));
                     const Tensor target_features = random_tensor({3, 4}, derive_seed(s, 5), 2, 3);
                     const LossWeights w{2.0, 0.5, 1.5, 0.7, 0.3};
                     return std::pair{in, ScalarFn([=](const auto& v) {
                                          LossParts p;
                                          p.adv = adv_loss_g(v[0]);
                                          p.content = content_loss(v[1], v[2]);
                                          p.feature = feature_matching_loss(v[3], target_features);
                                          p.latent = latent_loss(v[4], v[5]);
                                          p.ae = ae_loss(v[2], v[6]);
                                          p.decov = decov_loss(v[4]);
                                          return total_loss_rocgan(p, w);
                                      })};
                 }});
    return c;
}

}  // namespace

std::vector<OpCheck> run_gradient_suite(std::size_t trials, std::uint64_t seed, double h) {
    std::vector<OpCheck> out;
    for (const auto& c : cases()) {
        OpCheck r{c.name, trials, 0.0};
        for (std::size_t t = 0; t < trials; ++t) {
            auto [inputs, f] = c.make(derive_seed(derive_seed(seed, c.name), t));
            r.max_rel_error = std::max(r.max_rel_error, gradcheck(f, inputs, h).max_rel_error);
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace rocgan
