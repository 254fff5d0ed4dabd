#include "rocgan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "rocgan/errors.hpp"
#include "rocgan/rng.hpp"
#include "rocgan/tensor_io.hpp"

namespace rocgan {

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::conv_transpose: return "conv_transpose";
        case LayerKind::dense: return "dense";
    }
    return "?";
}

const char* to_string(Activation act) {
    switch (act) {
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::none: return "none";
    }
    return "?";
}

LayerSpec LayerSpec::conv(std::size_t k, std::size_t out, std::size_t stride, bool bn, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.kernel_h = s.kernel_w = k;
    s.out_channels = out;
    s.stride = stride;
    s.batch_norm = bn;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::conv_transpose(std::size_t k, std::size_t out, std::size_t stride, bool bn, Activation act) {
    LayerSpec s = conv(k, out, stride, bn, act);
    s.kind = LayerKind::conv_transpose;
    return s;
}

LayerSpec LayerSpec::dense(std::size_t out, Activation act, bool bn) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.kernel_h = s.kernel_w = 1;
    s.out_channels = out;
    s.stride = 1;
    s.batch_norm = bn;
    s.activation = act;
    return s;
}

std::size_t NetworkSpec::scaled_channels(const LayerSpec& layer) const {
    if (layer.fixed_channels) return layer.out_channels;
    return static_cast<std::size_t>(std::llround(static_cast<double>(layer.out_channels) * channel_scale));
}

void NetworkSpec::validate() const {
    if (!(channel_scale > 0.0) || !std::isfinite(channel_scale))
        throw ContractError("channel_scale must be positive");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string where = "layer " + std::to_string(i) + ": ";
        if (l.stride < 1) throw ContractError(where + "stride must be >= 1");
        if (l.out_channels < 1) throw ContractError(where + "out_channels must be >= 1");
        if (l.kernel_h < 1 || l.kernel_w < 1) throw ContractError(where + "kernel must be >= 1");
        if (scaled_channels(l) < 1) throw ContractError(where + "scaled channel count rounds to 0");
    }
    for (auto [from, to] : skip_links)
        if (from >= to || to >= layers.size())
            throw ContractError("invalid skip link (" + std::to_string(from) + ", " + std::to_string(to) + ")");
}

// ---------------------------------------------------------------------------
// ParameterStore

std::shared_ptr<ParamSlot> ParameterStore::add(const std::string& name, Tensor value, bool trainable) {
    if (contains(name)) throw ContractError("duplicate parameter name " + name);
    value.set_requires_grad(trainable);
    auto slot = std::make_shared<ParamSlot>(ParamSlot{std::move(value), trainable});
    slots_.emplace(name, slot);
    order_.push_back(name);
    return slot;
}

std::shared_ptr<ParamSlot> ParameterStore::slot(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw ContractError("unknown parameter " + name);
    return it->second;
}

const Tensor& ParameterStore::get(const std::string& name) const { return slot(name)->value; }

void ParameterStore::share(const std::vector<std::string>& group) {
    if (group.size() < 2) return;
    const auto& head = slot(group.front());
    for (const auto& name : group) {
        const auto& s = slot(name);
        if (s->value.shape() != head->value.shape())
            throw ContractError("cannot share " + name + " " + shape_str(s->value.shape()) + " with " + group.front() +
                                " " + shape_str(head->value.shape()));
        if (s->trainable != head->trainable) throw ContractError("cannot share trainable with buffer: " + name);
    }
    for (const auto& name : group) slot(name)->value = head->value;

    // Merge with any existing group that overlaps.
    std::set<std::string> merged(group.begin(), group.end());
    std::vector<std::vector<std::string>> kept;
    for (auto& g : groups_) {
        if (std::any_of(g.begin(), g.end(), [&](const std::string& n) { return merged.count(n) != 0; }))
            merged.insert(g.begin(), g.end());
        else
            kept.push_back(std::move(g));
    }
    std::vector<std::string> ordered;
    for (const auto& n : order_)
        if (merged.count(n)) ordered.push_back(n);
    for (const auto& n : ordered) slot(n)->value = head->value;
    kept.push_back(std::move(ordered));
    groups_ = std::move(kept);
}

std::vector<std::string> ParameterStore::representative_names() const {
    std::vector<std::string> out;
    std::set<const detail::Node*> seen;
    for (const auto& name : order_)
        if (seen.insert(slots_.at(name)->value.node().get()).second) out.push_back(name);
    return out;
}

std::vector<Tensor> ParameterStore::trainable_parameters() const { return trainable_parameters(""); }

std::vector<Tensor> ParameterStore::trainable_parameters(const std::string& prefix) const {
    std::vector<Tensor> out;
    std::set<const detail::Node*> seen;
    for (const auto& name : order_) {
        const auto& s = slots_.at(name);
        if (!s->trainable || name.rfind(prefix, 0) != 0) continue;
        if (seen.insert(s->value.node().get()).second) out.push_back(s->value);
    }
    return out;
}

std::size_t ParameterStore::parameter_count() const { return parameter_count(""); }

std::size_t ParameterStore::parameter_count(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& t : trainable_parameters(prefix)) n += t.numel();
    return n;
}

void ParameterStore::zero_grad() const {
    for (const auto& [name, s] : slots_) s->value.zero_grad();
}

void share_parameters(ParameterStore& store, const std::vector<std::string>& group) { store.share(group); }

// ---------------------------------------------------------------------------
// Network

namespace {

Tensor init_normal(Shape shape, double stddev, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.normal(0.0, stddev);
    return Tensor::from(std::move(shape), std::move(v));
}

std::optional<std::size_t> pick_conv_padding(std::size_t in, std::size_t k, std::size_t s) {
    const std::size_t target = (in + s - 1) / s;
    for (std::size_t p = 0; p <= k; ++p) {
        if (in + 2 * p < k) continue;
        if ((in + 2 * p - k) / s + 1 == target) return p;
    }
    return std::nullopt;
}

std::optional<std::pair<std::size_t, std::size_t>> pick_transpose_geometry(std::size_t in, std::size_t k,
                                                                         std::size_t s, std::size_t target) {
    const std::size_t base = (in - 1) * s + k;
    for (std::size_t p = 0; p <= k; ++p)
        for (std::size_t op = 0; op < s; ++op)
            if (base + op > 2 * p && base + op - 2 * p == target) return std::make_pair(p, op);
    return std::nullopt;
}

}  // namespace

Network::Network(const NetworkSpec& spec, Shape input_shape, ParameterStore& store, const std::string& prefix,
                 std::uint64_t seed, const std::map<std::size_t, std::size_t>& lateral_channels)
    : input_shape_(std::move(input_shape)), skips_(spec.skip_links), prefix_(prefix) {
    spec.validate();
    Shape cur = input_shape_;
    std::vector<Shape> outs;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& ls = spec.layers[i];
        const std::string where = prefix + " layer " + std::to_string(i) + ": ";
        Shape in = cur;
        for (auto [from, to] : skips_)
            if (to == i) {
                const Shape& sk = outs.at(from);
                if (sk.size() != in.size() || !std::equal(sk.begin() + 1, sk.end(), in.begin() + 1))
                    throw ContractError(where + "skip from layer " + std::to_string(from) + " has shape " +
                                        shape_str(sk) + ", input is " + shape_str(in));
                in[0] += sk[0];
            }
        if (auto it = lateral_channels.find(i); it != lateral_channels.end()) in[0] += it->second;

        Layer layer;
        layer.spec = ls;
        const std::size_t out_c = spec.scaled_channels(ls);
        const std::string base = prefix + ".l" + std::to_string(i);
        const std::uint64_t layer_seed = derive_seed(seed, base);
        Shape wshape;
        Shape out;
        switch (ls.kind) {
            case LayerKind::dense: {
                const std::size_t fan_in = shape_numel(in);
                wshape = {fan_in, out_c};
                out = {out_c};
                break;
            }
            case LayerKind::conv: {
                if (in.size() != 3) throw ContractError(where + "conv layer needs a C x H x W input, got " + shape_str(in));
                auto p = ls.padding ? ls.padding : pick_conv_padding(in[1], ls.kernel_h, ls.stride);
                auto pw = ls.padding ? ls.padding : pick_conv_padding(in[2], ls.kernel_w, ls.stride);
                if (!p || !pw || *p != *pw)
                    throw ContractError(where + "no padding maps " + shape_str(in) + " through stride " +
                                        std::to_string(ls.stride));
                layer.padding = *p;
                if (in[1] + 2 * *p < ls.kernel_h || in[2] + 2 * *p < ls.kernel_w)
                    throw ContractError(where + "kernel larger than padded input " + shape_str(in));
                out = {out_c, conv_output_size(in[1], ls.kernel_h, ls.stride, *p),
                       conv_output_size(in[2], ls.kernel_w, ls.stride, *p)};
                wshape = {out_c, in[0], ls.kernel_h, ls.kernel_w};
                break;
            }
            case LayerKind::conv_transpose: {
                if (in.size() != 3)
                    throw ContractError(where + "conv_transpose layer needs a C x H x W input, got " + shape_str(in));
                if (ls.padding) {
                    layer.padding = *ls.padding;
                    layer.output_padding = ls.output_padding.value_or(0);
                } else {
                    const std::size_t target = ls.out_size.value_or(in[1] * ls.stride);
                    auto g = pick_transpose_geometry(in[1], ls.kernel_h, ls.stride, target);
                    if (!g || in[1] != in[2])
                        throw ContractError(where + "no transposed geometry maps " + shape_str(in) + " to " +
                                            std::to_string(target));
                    layer.padding = g->first;
                    layer.output_padding = g->second;
                }
                const std::size_t oh =
                    conv_transpose_output_size(in[1], ls.kernel_h, ls.stride, layer.padding, layer.output_padding);
                const std::size_t ow =
                    conv_transpose_output_size(in[2], ls.kernel_w, ls.stride, layer.padding, layer.output_padding);
                out = {out_c, oh, ow};
                wshape = {in[0], out_c, ls.kernel_h, ls.kernel_w};
                break;
            }
        }
        layer.weight = store.add(base + ".weight", init_normal(wshape, spec.init_std, layer_seed));
        layer.names.push_back(base + ".weight");
        if (ls.bias.value_or(!ls.batch_norm)) {
            layer.bias = store.add(base + ".bias", Tensor::full({out_c}, spec.bias_init));
            layer.names.push_back(base + ".bias");
        }
        if (ls.batch_norm) {
            layer.gamma = store.add(base + ".bn.gamma", Tensor::full({out_c}, 1.0));
            layer.beta = store.add(base + ".bn.beta", Tensor::zeros({out_c}));
            layer.running_mean = store.add(base + ".bn.running_mean", Tensor::zeros({out_c}), false);
            layer.running_var = store.add(base + ".bn.running_var", Tensor::full({out_c}, 1.0), false);
            for (const char* n : {".bn.gamma", ".bn.beta", ".bn.running_mean", ".bn.running_var"})
                layer.names.push_back(base + n);
        }
        layers_.push_back(std::move(layer));
        outs.push_back(out);
        cur = out;
    }
    output_shapes_ = std::move(outs);
}

std::vector<std::string> Network::parameter_names() const {
    std::vector<std::string> out;
    for (const auto& l : layers_) out.insert(out.end(), l.names.begin(), l.names.end());
    return out;
}

Tensor Network::apply(const Layer& layer, const Tensor& x, NormMode mode) const {
    const LayerSpec& ls = layer.spec;
    Tensor y;
    switch (ls.kind) {
        case LayerKind::dense: {
            const std::size_t n = x.dim(0);
            Tensor flat = x.rank() == 2 ? x : reshape(x, {n, x.numel() / n});
            y = matmul(flat, layer.weight->value);
            break;
        }
        case LayerKind::conv: y = conv2d(x, layer.weight->value, ls.stride, layer.padding); break;
        case LayerKind::conv_transpose:
            y = conv_transpose2d(x, layer.weight->value, ls.stride, layer.padding, layer.output_padding);
            break;
    }
    if (layer.bias) y = add_channel_bias(y, layer.bias->value);
    switch (ls.activation) {
        case Activation::leaky_relu: y = leaky_relu(y, 0.2); break;
        case Activation::relu: y = relu(y); break;
        case Activation::sigmoid: y = sigmoid(y); break;
        case Activation::tanh: y = tanh(y); break;
        case Activation::none: break;
    }
    if (ls.batch_norm) {
        BatchNormStats stats{layer.running_mean->value, layer.running_var->value};
        y = batch_norm(y, layer.gamma->value, layer.beta->value, stats, mode);
    }
    return y;
}

ForwardResult Network::forward(const Tensor& x, NormMode mode, const std::map<std::size_t, Tensor>& lateral) const {
    if (x.rank() != input_shape_.size() + 1 || !std::equal(input_shape_.begin(), input_shape_.end(), x.shape().begin() + 1))
        throw ContractError(prefix_ + ": input " + shape_str(x.shape()) + " does not match " + shape_str(input_shape_));
    ForwardResult r;
    Tensor cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto [from, to] : skips_)
            if (to == i) cur = concat_channels(cur, r.layer_outputs.at(from));
        if (auto it = lateral.find(i); it != lateral.end()) cur = concat_channels(cur, it->second);
        cur = apply(layers_[i], cur, mode);
        r.layer_outputs.push_back(cur);
        r.taps["layer" + std::to_string(i)] = cur;
    }
    r.output = cur;
    r.taps["output"] = cur;
    return r;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::string file_stem(const std::string& name) {
    std::string s = name;
    for (char& c : s)
        if (c == '/' || c == '\\') c = '_';
    return s;
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "rocgan-checkpoint";
    manifest["version"] = 1;
    std::map<const detail::Node*, std::string> files;
    for (const auto& rep : store.representative_names()) {
        const std::string file = file_stem(rep) + ".tnsr";
        write_tensor((fs::path(dir) / file).string(), store.get(rep));
        files[store.get(rep).node().get()] = file;
    }
    nlohmann::json params = nlohmann::json::array();
    for (const auto& name : store.names()) {
        const auto s = store.slot(name);
        params.push_back({{"name", name},
                          {"shape", s->value.shape()},
                          {"trainable", s->trainable},
                          {"file", files.at(s->value.node().get())}});
    }
    manifest["parameters"] = params;
    manifest["sharing_groups"] = store.sharing_groups();
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << manifest.dump(2) << '\n';
}

void load_checkpoint(ParameterStore& store, const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw FormatError("checkpoint manifest missing in " + dir);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }
    for (const auto& g : manifest.at("sharing_groups")) store.share(g.get<std::vector<std::string>>());
    std::map<std::string, Tensor> cache;
    for (const auto& p : manifest.at("parameters")) {
        const auto name = p.at("name").get<std::string>();
        const auto file = p.at("file").get<std::string>();
        auto it = cache.find(file);
        if (it == cache.end()) it = cache.emplace(file, read_tensor((fs::path(dir) / file).string())).first;
        Tensor dst = store.get(name);
        if (dst.shape() != it->second.shape())
            throw FormatError("checkpoint shape mismatch for " + name + ": " + shape_str(it->second.shape()) +
                              " vs " + shape_str(dst.shape()));
        std::copy(it->second.data().begin(), it->second.data().end(), dst.mutable_data().begin());
    }
}

}  // namespace rocgan
