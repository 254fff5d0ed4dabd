#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rocgan/tensor.hpp"

namespace rocgan {

enum class LayerKind { conv, conv_transpose, dense };
enum class Activation { leaky_relu, relu, sigmoid, tanh, none };

const char* to_string(LayerKind kind);
const char* to_string(Activation act);

struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    std::size_t kernel_h = 4;
    std::size_t kernel_w = 4;
    std::size_t out_channels = 1;  // out_features for dense layers
    std::size_t stride = 1;
    bool batch_norm = false;
    Activation activation = Activation::leaky_relu;
    // Layers without batch norm carry a bias unless told otherwise.
    std::optional<bool> bias;
    // Output channels that must not be multiplied by NetworkSpec::channel_scale
    // (image channels, logits).
    bool fixed_channels = false;
    // Explicit geometry. When unset, conv layers pick the smallest padding that
    // gives ceil(H / stride) and transposed layers the smallest (padding,
    // output_padding) reaching `out_size` (default H * stride).
    std::optional<std::size_t> padding;
    std::optional<std::size_t> output_padding;
    std::optional<std::size_t> out_size;

    static LayerSpec conv(std::size_t k, std::size_t out, std::size_t stride, bool bn,
                          Activation act = Activation::leaky_relu);
    static LayerSpec conv_transpose(std::size_t k, std::size_t out, std::size_t stride, bool bn,
                                    Activation act = Activation::leaky_relu);
    static LayerSpec dense(std::size_t out, Activation act = Activation::relu, bool bn = false);
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    // (from, to): output of layer `from` is channel-concatenated to the input of layer `to`.
    std::vector<std::pair<std::size_t, std::size_t>> skip_links;
    double channel_scale = 1.0;
    double init_std = 0.02;
    double bias_init = 0.0;

    std::size_t scaled_channels(const LayerSpec& layer) const;
    void validate() const;
};

struct ParamSlot {
    Tensor value;
    bool trainable = true;
};

/// Named parameters with hard weight sharing.
///
/// Every name owns a slot; `share` rebinds all slots of a group to one tensor,
/// so reads, writes and accumulated gradients are common to the group.
class ParameterStore {
public:
    std::shared_ptr<ParamSlot> add(const std::string& name, Tensor value, bool trainable = true);
    bool contains(const std::string& name) const { return slots_.count(name) != 0; }
    const Tensor& get(const std::string& name) const;
    std::shared_ptr<ParamSlot> slot(const std::string& name) const;

    void share(const std::vector<std::string>& group);
    const std::vector<std::vector<std::string>>& sharing_groups() const { return groups_; }

    const std::vector<std::string>& names() const { return order_; }
    // First registered name for every distinct storage, in registration order.
    std::vector<std::string> representative_names() const;
    std::vector<Tensor> trainable_parameters() const;
    std::vector<Tensor> trainable_parameters(const std::string& prefix) const;
    std::size_t parameter_count() const;
    std::size_t parameter_count(const std::string& prefix) const;
    void zero_grad() const;

private:
    std::vector<std::string> order_;
    std::map<std::string, std::shared_ptr<ParamSlot>> slots_;
    std::vector<std::vector<std::string>> groups_;
};

void share_parameters(ParameterStore& store, const std::vector<std::string>& group);

struct ForwardResult {
    Tensor output;
    std::vector<Tensor> layer_outputs;
    std::map<std::string, Tensor> taps;
};

/// A built stack of layers; each block is conv -> activation -> batch norm.
class Network {
public:
    // input_shape excludes the batch axis: (C, H, W) for conv stacks, (F) for dense.
    // `lateral_channels` maps a layer index to channels concatenated at its input
    // from outside this network (encoder-to-decoder shortcuts).
    Network(const NetworkSpec& spec, Shape input_shape, ParameterStore& store, const std::string& prefix,
            std::uint64_t seed, const std::map<std::size_t, std::size_t>& lateral_channels = {});

    ForwardResult forward(const Tensor& x, NormMode mode,
                          const std::map<std::size_t, Tensor>& lateral = {}) const;
    Tensor operator()(const Tensor& x, NormMode mode) const { return forward(x, mode).output; }

    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return output_shapes_.empty() ? input_shape_ : output_shapes_.back(); }
    const Shape& layer_output_shape(std::size_t i) const { return output_shapes_.at(i); }
    std::size_t size() const { return layers_.size(); }
    const std::string& prefix() const { return prefix_; }
    std::vector<std::string> parameter_names() const;

private:
    struct Layer {
        LayerSpec spec;
        std::size_t padding = 0;
        std::size_t output_padding = 0;
        std::shared_ptr<ParamSlot> weight, bias, gamma, beta, running_mean, running_var;
        std::vector<std::string> names;
    };

    Tensor apply(const Layer& layer, const Tensor& x, NormMode mode) const;

    Shape input_shape_;
    std::vector<Shape> output_shapes_;
    std::vector<Layer> layers_;
    std::vector<std::pair<std::size_t, std::size_t>> skips_;
    std::string prefix_;
};

inline Network build_stack(const NetworkSpec& spec, const Shape& input_shape, ParameterStore& store,
                           const std::string& prefix, std::uint64_t seed) {
    return Network(spec, input_shape, store, prefix, seed);
}

// Saves one TNSR file per distinct storage plus manifest.json (names, shapes,
// files, sharing groups) into `dir`.
void save_checkpoint(const ParameterStore& store, const std::string& dir);
// Re-applies the manifest's sharing groups and loads values into an existing store.
void load_checkpoint(ParameterStore& store, const std::string& dir);

}  // namespace rocgan
