#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rocgan/nn.hpp"

namespace rocgan {

enum class Architecture { four_layer, five_layer, six_layer };

const char* to_string(Architecture a);
Architecture parse_architecture(const std::string& s);

/// Encoder/decoder pair plus encoder-to-decoder shortcuts.
struct GeneratorSpec {
    Shape input_shape;  // C x H x W, or F for dense generators
    NetworkSpec encoder;
    NetworkSpec decoder;
    // (encoder layer, decoder layer): encoder output concatenated to the decoder layer input.
    std::vector<std::pair<std::size_t, std::size_t>> lateral;
};

// Convolutional 4layer/5layer/6layer generators. The decoder mirrors
// the encoder's spatial sizes; `skip` adds the third-encoder-layer to
// second-decoder-layer shortcut.
GeneratorSpec image_generator_spec(Architecture arch, std::size_t side, std::size_t channels = 3,
                                   double channel_scale = 1.0, bool skip = false);
// Four-layer discriminator; input is the channel concatenation of source and candidate.
NetworkSpec discriminator_spec(double channel_scale = 1.0);
// Two dense layers per encoder/decoder, each followed by ReLU.
GeneratorSpec mlp_generator_spec(std::size_t in_features, std::size_t code, std::size_t out_features,
                                 std::size_t hidden, double init_std, double bias_init = 0.0);

/// One encoder-decoder pathway registered under `enc_<name>` / `dec_<name>`.
class Pathway {
public:
    Pathway(const GeneratorSpec& spec, ParameterStore& store, const std::string& name, std::uint64_t seed);

    struct Output {
        Tensor output;
        Tensor code;
        std::map<std::string, Tensor> encoder_taps;
    };

    Output forward_with_skips(const Tensor& x, NormMode mode) const;
    Tensor operator()(const Tensor& x, NormMode mode) const { return forward_with_skips(x, mode).output; }

    const Network& encoder() const { return encoder_; }
    const Network& decoder() const { return decoder_; }
    const std::string& name() const { return name_; }
    std::string encoder_prefix() const { return "enc_" + name_; }
    std::string decoder_prefix() const { return "dec_" + name_; }

private:
    std::string name_;
    std::vector<std::pair<std::size_t, std::size_t>> lateral_;
    Network encoder_;
    Network decoder_;
};

inline Pathway::Output forward_with_skips(const Pathway& p, const Tensor& x, NormMode mode) {
    return p.forward_with_skips(x, mode);
}

/// Reg pathway s -> y and AE pathway y -> y whose decoder parameters (and
/// batch-norm statistics) form one sharing group per tensor.
class RoCGANGenerator {
public:
    RoCGANGenerator(const GeneratorSpec& spec, ParameterStore& store, std::uint64_t seed, bool share_decoder = true);

    Pathway::Output forward_reg(const Tensor& s, NormMode mode) const { return reg_.forward_with_skips(s, mode); }
    Pathway::Output forward_ae(const Tensor& y, NormMode mode) const { return ae_.forward_with_skips(y, mode); }

    const Pathway& reg() const { return reg_; }
    const Pathway& ae() const { return ae_; }
    bool shared() const { return shared_; }

private:
    Pathway reg_;
    Pathway ae_;
    bool shared_;
};

RoCGANGenerator build_rocgan(const GeneratorSpec& spec, ParameterStore& store, std::uint64_t seed);

class Discriminator {
public:
    Discriminator(const NetworkSpec& spec, Shape image_shape, ParameterStore& store, std::uint64_t seed,
                  const std::string& prefix = "D");

    struct Output {
        Tensor logits;
        Tensor features;  // penultimate block output
    };

    // Conditions by concatenating s and the candidate along channels.
    Output discriminate(const Tensor& s, const Tensor& candidate, NormMode mode) const;
    const Network& network() const { return net_; }
    std::string prefix() const { return net_.prefix(); }

private:
    Network net_;
};

/// Autoencoder on target images with a dense code discriminator matching the
/// bottleneck to a standard normal prior.
class AdversarialAutoencoder {
public:
    AdversarialAutoencoder(const GeneratorSpec& spec, ParameterStore& store, std::uint64_t seed,
                           std::size_t code_hidden = 64);

    const Pathway& autoencoder() const { return ae_; }
    const Network& code_discriminator() const { return code_d_; }
    std::size_t code_size() const;

private:
    Pathway ae_;
    Network code_d_;
};

AdversarialAutoencoder build_aae_reference(const GeneratorSpec& spec, ParameterStore& store, std::uint64_t seed);

}  // namespace rocgan
