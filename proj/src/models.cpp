#include "rocgan/models.hpp"

#include "rocgan/errors.hpp"

namespace rocgan {

const char* to_string(Architecture a) {
    switch (a) {
        case Architecture::four_layer: return "4layer";
        case Architecture::five_layer: return "5layer";
        case Architecture::six_layer: return "6layer";
    }
    return "?";
}

Architecture parse_architecture(const std::string& s) {
    if (s == "4layer") return Architecture::four_layer;
    if (s == "5layer") return Architecture::five_layer;
    if (s == "6layer") return Architecture::six_layer;
    throw ContractError("unknown architecture '" + s + "'");
}

namespace {

struct Row {
    std::size_t kernel, filters, stride;
    bool bn;
};

// Encoder and decoder tables; the last decoder row produces image channels.
const std::vector<Row>& encoder_rows(Architecture a) {
    static const std::vector<Row> four = {{4, 64, 4, false}, {4, 128, 2, true}, {4, 256, 2, true}, {4, 512, 4, true}};
    static const std::vector<Row> five = {
        {4, 32, 2, false}, {4, 64, 2, true}, {4, 128, 2, true}, {4, 256, 2, true}, {4, 768, 4, true}};
    static const std::vector<Row> six = {{4, 32, 2, false}, {4, 64, 2, true},  {4, 128, 2, true},
                                         {4, 256, 2, true}, {4, 512, 2, true}, {4, 768, 2, true}};
    switch (a) {
        case Architecture::four_layer: return four;
        case Architecture::five_layer: return five;
        case Architecture::six_layer: return six;
    }
    return four;
}

const std::vector<Row>& decoder_rows(Architecture a) {
    static const std::vector<Row> four = {{1, 256, 4, true}, {4, 128, 2, true}, {4, 64, 2, true}, {4, 0, 4, false}};
    static const std::vector<Row> five = {
        {1, 256, 4, true}, {4, 128, 2, true}, {4, 64, 2, true}, {4, 32, 2, true}, {4, 0, 2, false}};
    static const std::vector<Row> six = {{1, 512, 2, true}, {1, 256, 2, true}, {4, 128, 2, true},
                                         {4, 64, 2, true},  {4, 32, 2, true},  {4, 0, 2, false}};
    switch (a) {
        case Architecture::four_layer: return four;
        case Architecture::five_layer: return five;
        case Architecture::six_layer: return six;
    }
    return four;
}

}  // namespace

GeneratorSpec image_generator_spec(Architecture arch, std::size_t side, std::size_t channels, double channel_scale,
                                   bool skip) {
    GeneratorSpec g;
    g.input_shape = {channels, side, side};
    g.encoder.channel_scale = g.decoder.channel_scale = channel_scale;
    std::vector<std::size_t> sizes{side};
    for (const Row& r : encoder_rows(arch)) {
        g.encoder.layers.push_back(LayerSpec::conv(r.kernel, r.filters, r.stride, r.bn));
        sizes.push_back((sizes.back() + r.stride - 1) / r.stride);
    }
    const auto& dec = decoder_rows(arch);
    for (std::size_t j = 0; j < dec.size(); ++j) {
        const Row& r = dec[j];
        const bool last = j + 1 == dec.size();
        LayerSpec l = LayerSpec::conv_transpose(r.kernel, last ? channels : r.filters, r.stride, r.bn,
                                                last ? Activation::tanh : Activation::leaky_relu);
        l.fixed_channels = last;
        l.out_size = sizes[sizes.size() - 2 - j];
        g.decoder.layers.push_back(l);
    }
    if (skip) {
        if (arch != Architecture::four_layer) throw ContractError("the shortcut variant is defined for 4layer");
        g.lateral.emplace_back(2, 1);
    }
    return g;
}

NetworkSpec discriminator_spec(double channel_scale) {
    NetworkSpec d;
    d.channel_scale = channel_scale;
    const std::size_t pads[] = {1, 0, 1, 1};
    d.layers = {LayerSpec::conv(4, 64, 2, false), LayerSpec::conv(4, 128, 2, true), LayerSpec::conv(4, 256, 1, true),
                LayerSpec::conv(4, 1, 1, false, Activation::none)};
    d.layers.back().fixed_channels = true;
    for (std::size_t i = 0; i < 4; ++i) d.layers[i].padding = pads[i];
    return d;
}

GeneratorSpec mlp_generator_spec(std::size_t in_features, std::size_t code, std::size_t out_features,
                                 std::size_t hidden, double init_std, double bias_init) {
    GeneratorSpec g;
    g.input_shape = {in_features};
    g.encoder.init_std = g.decoder.init_std = init_std;
    g.encoder.bias_init = g.decoder.bias_init = bias_init;
    g.encoder.layers = {LayerSpec::dense(hidden), LayerSpec::dense(code)};
    g.decoder.layers = {LayerSpec::dense(hidden), LayerSpec::dense(out_features)};
    return g;
}

// ---------------------------------------------------------------------------

namespace {

std::map<std::size_t, std::size_t> lateral_channels(const GeneratorSpec& spec, const Network& encoder) {
    std::map<std::size_t, std::size_t> out;
    for (auto [from, to] : spec.lateral) out[to] += encoder.layer_output_shape(from).at(0);
    return out;
}

}  // namespace

Pathway::Pathway(const GeneratorSpec& spec, ParameterStore& store, const std::string& name, std::uint64_t seed)
    : name_(name),
      lateral_(spec.lateral),
      encoder_(spec.encoder, spec.input_shape, store, "enc_" + name, seed),
      decoder_(spec.decoder, encoder_.output_shape(), store, "dec_" + name, seed, lateral_channels(spec, encoder_)) {}

Pathway::Output Pathway::forward_with_skips(const Tensor& x, NormMode mode) const {
    ForwardResult enc = encoder_.forward(x, mode);
    std::map<std::size_t, Tensor> lateral;
    for (auto [from, to] : lateral_) {
        if (lateral.count(to)) throw ContractError("two shortcuts into one decoder layer");
        lateral[to] = enc.layer_outputs.at(from);
    }
    ForwardResult dec = decoder_.forward(enc.output, mode, lateral);
    Output out{dec.output, enc.output, std::move(enc.taps)};
    out.encoder_taps["bottleneck"] = enc.output;
    return out;
}

RoCGANGenerator::RoCGANGenerator(const GeneratorSpec& spec, ParameterStore& store, std::uint64_t seed,
                                 bool share_decoder)
    : reg_(spec, store, "G", seed), ae_(spec, store, "AE", seed), shared_(share_decoder) {
    if (reg_.encoder().output_shape() != ae_.encoder().output_shape())
        throw ContractError("bottleneck shapes of the two pathways differ");
    if (!share_decoder) return;
    const auto reg_names = reg_.decoder().parameter_names();
    const auto ae_names = ae_.decoder().parameter_names();
    for (std::size_t i = 0; i < reg_names.size(); ++i) share_parameters(store, {reg_names[i], ae_names[i]});
}

RoCGANGenerator build_rocgan(const GeneratorSpec& spec, ParameterStore& store, std::uint64_t seed) {
    return RoCGANGenerator(spec, store, seed, true);
}

Discriminator::Discriminator(const NetworkSpec& spec, Shape image_shape, ParameterStore& store, std::uint64_t seed,
                             const std::string& prefix)
    : net_(spec, [&] {
          Shape s = image_shape;
          s.at(0) *= 2;
          return s;
      }(), store, prefix, seed) {
    if (net_.size() < 2) throw ContractError("discriminator needs at least two layers");
}

Discriminator::Output Discriminator::discriminate(const Tensor& s, const Tensor& candidate, NormMode mode) const {
    if (s.shape() != candidate.shape())
        throw ContractError("discriminator inputs differ: " + shape_str(s.shape()) + " vs " +
                            shape_str(candidate.shape()));
    ForwardResult r = net_.forward(concat_channels(s, candidate), mode);
    return {r.output, r.layer_outputs[net_.size() - 2]};
}

namespace {

NetworkSpec code_discriminator_spec(std::size_t hidden) {
    NetworkSpec s;
    s.layers = {LayerSpec::dense(hidden, Activation::leaky_relu), LayerSpec::dense(1, Activation::none)};
    s.layers.back().fixed_channels = true;
    return s;
}

}  // namespace

AdversarialAutoencoder::AdversarialAutoencoder(const GeneratorSpec& spec, ParameterStore& store, std::uint64_t seed,
                                               std::size_t code_hidden)
    : ae_(spec, store, "AAE", seed),
      code_d_(code_discriminator_spec(code_hidden), {shape_numel(ae_.encoder().output_shape())}, store, "Dcode",
              seed) {}

std::size_t AdversarialAutoencoder::code_size() const { return shape_numel(ae_.encoder().output_shape()); }

AdversarialAutoencoder build_aae_reference(const GeneratorSpec& spec, ParameterStore& store, std::uint64_t seed) {
    return AdversarialAutoencoder(spec, store, seed);
}

}  // namespace rocgan
