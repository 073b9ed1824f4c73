#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mdn/batchnorm.hpp"
#include "mdn/conv.hpp"
#include "mdn/errors.hpp"
#include "mdn/nn_ops.hpp"
#include "mdn/optim.hpp"
#include "mdn/rng.hpp"

namespace mdn {

// Structural ablations of the full network.
enum class Variant {
    full,
    no_grl,       // drop the block-level input skip
    no_lrls,      // drop the intra-block residual sums
    no_residual,  // drop both
    non_dilated,  // dense kernels of equal receptive field
    no_concat,    // single branch straight into the fusion convolution
};

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_grl: return "no-grl";
        case Variant::no_lrls: return "no-lrls";
        case Variant::no_residual: return "no-residual";
        case Variant::non_dilated: return "non-dilated";
        case Variant::no_concat: return "no-concat";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::full, Variant::no_grl, Variant::no_lrls,
                      Variant::no_residual, Variant::non_dilated,
                      Variant::no_concat}) {
        if (name == variant_name(v)) return v;
    }
    throw ConfigError(msg("unknown variant '", name, "'"));
}

/// One block: seven convolution+relu layers, two residual tap chains, batch
/// normalization on the concatenated branches, and a fusion convolution.
struct BlockConfig {
    std::vector<ConvSpec> layer_specs;  // exactly 7 entries
    bool lrl_enabled = true;
    bool grl_enabled = true;
    bool concat_enabled = true;
    int fusion_kernel = 3;

    int wide_channels() const { return layer_specs[5].out_channels; }
    int narrow_channels() const { return layer_specs[6].out_channels; }
};

/// The stock block: a 9x9 opening convolution into 32 maps, then alternating
/// 3x3 layers of 64 maps at dilation 2 and 32 maps at dilation 3.
inline BlockConfig default_block_config(int input_channels) {
    BlockConfig block;
    block.layer_specs = {
        ConvSpec::same(input_channels, 32, 9, 1),
        ConvSpec::same(32, 64, 3, 2),
        ConvSpec::same(64, 32, 3, 3),
        ConvSpec::same(32, 64, 3, 2),
        ConvSpec::same(64, 32, 3, 3),
        ConvSpec::same(32, 64, 3, 2),
        ConvSpec::same(64, 32, 3, 3),
    };
    return block;
}

struct ModelConfig {
    int num_blocks = 2;
    int input_channels = 1;  // 1 real, 2 complex
    BlockConfig block;
    Variant variant = Variant::full;
    float bn_momentum = 0.1f;
    float bn_eps = 1e-5f;

    /// Width the fusion convolution sees.
    int fusion_in_channels() const {
        return block.concat_enabled
                   ? block.wide_channels() + block.narrow_channels()
                   : block.narrow_channels();
    }

    ConvSpec fusion_spec() const {
        return ConvSpec::same(fusion_in_channels(), input_channels,
                              block.fusion_kernel, 1);
    }

    void validate() const {
        if (num_blocks < 1)
            throw ConfigError(msg("model: need at least 1 block, got ", num_blocks));
        if (input_channels != 1 && input_channels != 2)
            throw ConfigError(msg("model: input channels must be 1 or 2, got ",
                                  input_channels));
        if (block.layer_specs.size() != 7)
            throw ConfigError(msg("block: exactly 7 convolution layers required, got ",
                                  block.layer_specs.size()));
        for (const ConvSpec& s : block.layer_specs) s.validate();
        fusion_spec().validate();
        if (block.layer_specs[0].in_channels != input_channels)
            throw ConfigError(msg("block: first layer takes ",
                                  block.layer_specs[0].in_channels,
                                  " channels but the model input has ",
                                  input_channels));
        for (int i = 1; i < 7; ++i) {
            if (block.layer_specs[i].in_channels !=
                block.layer_specs[i - 1].out_channels)
                throw ConfigError(msg("block: layer ", i, " expects ",
                                      block.layer_specs[i].in_channels,
                                      " channels, previous layer produces ",
                                      block.layer_specs[i - 1].out_channels));
        }
        if (block.lrl_enabled) {
            // The even layers sum with each other, as do the odd ones; the
            // sums only type-check when those widths agree.
            const int narrow = block.layer_specs[0].out_channels;
            const int wide = block.layer_specs[1].out_channels;
            for (int i : {2, 4, 6}) {
                if (block.layer_specs[i].out_channels != narrow)
                    throw ConfigError(msg("block: residual sum needs layer ", i,
                                          " width ", narrow, ", got ",
                                          block.layer_specs[i].out_channels));
            }
            for (int i : {3, 5}) {
                if (block.layer_specs[i].out_channels != wide)
                    throw ConfigError(msg("block: residual sum needs layer ", i,
                                          " width ", wide, ", got ",
                                          block.layer_specs[i].out_channels));
            }
        }
    }
};

inline ModelConfig default_model_config(int input_channels = 1, int blocks = 2) {
    ModelConfig config;
    config.num_blocks = blocks;
    config.input_channels = input_channels;
    config.block = default_block_config(input_channels);
    return config;
}

/// Derives an ablation from the full configuration. Idempotent; the input is
/// not modified.
inline ModelConfig make_variant(ModelConfig base, Variant variant) {
    base.variant = variant;
    base.block.lrl_enabled =
        variant != Variant::no_lrls && variant != Variant::no_residual;
    base.block.grl_enabled =
        variant != Variant::no_grl && variant != Variant::no_residual;
    base.block.concat_enabled = variant != Variant::no_concat;
    if (variant == Variant::non_dilated) {
        for (ConvSpec& s : base.block.layer_specs) {
            if (s.dilation == 1) continue;
            const int dense_kernel = s.extent();
            s.kernel_size = dense_kernel;
            s.dilation = 1;
            s.padding = (dense_kernel - 1) / 2;
        }
    }
    return base;
}

inline std::int64_t conv_param_count(const ConvSpec& s) {
    return static_cast<std::int64_t>(s.weight_count()) + s.out_channels;
}

/// Trainable scalars: kernel weights, biases, and the normalization
/// gamma/beta pairs. Running statistics are state, not parameters.
inline std::int64_t count_params(const ModelConfig& config) {
    config.validate();
    std::int64_t per_block = 0;
    for (const ConvSpec& s : config.block.layer_specs)
        per_block += conv_param_count(s);
    if (config.block.concat_enabled)
        per_block +=
            2 * (config.block.wide_channels() + config.block.narrow_channels());
    per_block += conv_param_count(config.fusion_spec());
    return per_block * config.num_blocks;
}

struct ReceptiveField {
    int extent = 1;  // square, odd
};

/// Composed receptive extent along the longest input-to-output path: each
/// layer widens it by dilation*(kernel-1).
inline ReceptiveField receptive_field(const ModelConfig& config) {
    config.validate();
    int per_block = 0;
    for (const ConvSpec& s : config.block.layer_specs)
        per_block += s.dilation * (s.kernel_size - 1);
    const ConvSpec fuse = config.fusion_spec();
    per_block += fuse.dilation * (fuse.kernel_size - 1);
    return ReceptiveField{1 + config.num_blocks * per_block};
}

namespace detail {

template <typename T>
struct ConvLayer {
    ConvSpec spec;
    Parameter<T> weight;
    Parameter<T> bias;

    void create() {
        weight = Parameter<T>(Tensor<T>(spec.out_channels, spec.in_channels,
                                        spec.kernel_size, spec.kernel_size));
        bias = Parameter<T>(Tensor<T>(1, spec.out_channels, 1, 1));
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        return conv2d_forward(x, spec, weight.value, bias.value);
    }

    // Accumulates the parameter gradients, returns the input gradient.
    Tensor<T> backward(const Tensor<T>& cached_input, const Tensor<T>& upstream) {
        ConvGrads<T> g = conv2d_backward(cached_input, spec, weight.value, upstream);
        for (std::size_t i = 0; i < g.weights.size(); ++i)
            weight.gradient[i] += g.weights[i];
        for (std::size_t i = 0; i < g.bias.size(); ++i)
            bias.gradient[i] += g.bias[i];
        return std::move(g.input);
    }
};

template <typename T>
struct BatchNormLayer {
    Parameter<T> gamma;
    Parameter<T> beta;
    RunningStats<T> running;
    BatchNormSaved<T> saved;
    T momentum = T(0.1);
    T eps = T(1e-5);

    void create(int channels) {
        gamma = Parameter<T>(Tensor<T>(1, channels, 1, 1, T(1)));
        beta = Parameter<T>(Tensor<T>(1, channels, 1, 1));
        running = RunningStats<T>(channels);
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        return batchnorm_forward(x, gamma.value, beta.value, mode, running,
                                 momentum, eps,
                                 mode == Mode::train ? &saved : nullptr);
    }

    Tensor<T> backward(const Tensor<T>& upstream) {
        if (saved.normalized.size() == 0)
            throw std::logic_error("batchnorm backward without a training forward");
        BatchNormGrads<T> g = batchnorm_backward(upstream, gamma.value, saved);
        for (std::size_t i = 0; i < g.gamma.size(); ++i) {
            gamma.gradient[i] += g.gamma[i];
            beta.gradient[i] += g.beta[i];
        }
        return std::move(g.input);
    }
};

}  // namespace detail

/// The reconstruction network: `num_blocks` copies of the block wired
/// input -> conv stack -> residual taps -> normalize -> concat -> fusion,
/// with the block input added back on top when the global skip is enabled.
template <typename T = float>
class Model {
public:
    Model() = default;

    explicit Model(const ModelConfig& config) : config_(config) {
        config_.validate();
        blocks_.resize(config_.num_blocks);
        for (Block& block : blocks_) {
            block.convs.resize(7);
            for (int i = 0; i < 7; ++i) {
                block.convs[i].spec = config_.block.layer_specs[i];
                block.convs[i].create();
            }
            block.fuse.spec = config_.fusion_spec();
            block.fuse.create();
            if (config_.block.concat_enabled) {
                block.bn_wide.create(config_.block.wide_channels());
                block.bn_narrow.create(config_.block.narrow_channels());
                for (auto* bn : {&block.bn_wide, &block.bn_narrow}) {
                    bn->momentum = static_cast<T>(config_.bn_momentum);
                    bn->eps = static_cast<T>(config_.bn_eps);
                }
            }
        }
    }

    const ModelConfig& config() const { return config_; }

    /// He-normal kernels (suited to relu stacks), zero biases, identity
    /// normalization. Deterministic per seed.
    void init_params(std::uint64_t seed) {
        auto rng = make_engine(seed, 0x1417);
        for (Block& block : blocks_) {
            for (auto& conv : block.convs) init_conv(conv, rng);
            init_conv(block.fuse, rng);
            if (config_.block.concat_enabled) {
                for (auto* bn : {&block.bn_wide, &block.bn_narrow}) {
                    bn->gamma.value.fill(T(1));
                    bn->beta.value.fill(T(0));
                    bn->running = RunningStats<T>(bn->gamma.value.c());
                }
            }
        }
    }

    /// All kernels and biases to zero: with the global skip the network is
    /// then exactly the identity map.
    void zero_weights() {
        for (Block& block : blocks_) {
            for (auto& conv : block.convs) {
                conv.weight.value.fill(T(0));
                conv.bias.value.fill(T(0));
            }
            block.fuse.weight.value.fill(T(0));
            block.fuse.bias.value.fill(T(0));
        }
    }

    Tensor<T> forward(const Tensor<T>& input, Mode mode) {
        if (input.c() != config_.input_channels)
            throw ShapeError(msg("model: input has ", input.c(),
                                 " channels, expected ", config_.input_channels));
        Tensor<T> cur = input;
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            cur = block_forward(blocks_[b], cur, mode, b);
        return cur;
    }

    /// Accumulates parameter gradients for the preceding training-mode
    /// forward; returns the gradient with respect to the model input.
    Tensor<T> backward(const Tensor<T>& upstream) {
        Tensor<T> cur = upstream;
        for (std::size_t b = blocks_.size(); b-- > 0;)
            cur = block_backward(blocks_[b], cur);
        return cur;
    }

    void zero_grad() {
        for_each_parameter([](const std::string&, Parameter<T>& p) { p.zero_grad(); });
    }

    template <typename Fn>
    void for_each_parameter(Fn&& fn) {
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            Block& block = blocks_[b];
            const std::string prefix = msg("block", b, ".");
            for (int i = 0; i < 7; ++i) {
                fn(msg(prefix, "conv", i, ".weight"), block.convs[i].weight);
                fn(msg(prefix, "conv", i, ".bias"), block.convs[i].bias);
            }
            if (config_.block.concat_enabled) {
                fn(prefix + "bn_wide.gamma", block.bn_wide.gamma);
                fn(prefix + "bn_wide.beta", block.bn_wide.beta);
                fn(prefix + "bn_narrow.gamma", block.bn_narrow.gamma);
                fn(prefix + "bn_narrow.beta", block.bn_narrow.beta);
            }
            fn(prefix + "fuse.weight", block.fuse.weight);
            fn(prefix + "fuse.bias", block.fuse.bias);
        }
    }

    /// Running statistics, in a stable order for serialization.
    template <typename Fn>
    void for_each_buffer(Fn&& fn) {
        if (!config_.block.concat_enabled) return;
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            Block& block = blocks_[b];
            const std::string prefix = msg("block", b, ".");
            fn(prefix + "bn_wide.running_mean", block.bn_wide.running.mean);
            fn(prefix + "bn_wide.running_var", block.bn_wide.running.variance);
            fn(prefix + "bn_narrow.running_mean", block.bn_narrow.running.mean);
            fn(prefix + "bn_narrow.running_var", block.bn_narrow.running.variance);
        }
    }

    std::vector<std::pair<std::string, Parameter<T>*>> named_parameters() {
        std::vector<std::pair<std::string, Parameter<T>*>> out;
        for_each_parameter([&out](const std::string& name, Parameter<T>& p) {
            out.emplace_back(name, &p);
        });
        return out;
    }

private:
    struct Block {
        std::vector<detail::ConvLayer<T>> convs;
        detail::ConvLayer<T> fuse;
        detail::BatchNormLayer<T> bn_wide;
        detail::BatchNormLayer<T> bn_narrow;

        // Training-mode caches. The relu gate reads the layer outputs (which
        // are positive exactly where the pre-activations were), so the
        // pre-activations themselves need no cache.
        Tensor<T> input;
        std::vector<Tensor<T>> act;  // layer outputs, the conv backward inputs
        Tensor<T> fuse_input;
    };

    template <typename Rng>
    void init_conv(detail::ConvLayer<T>& conv, Rng& rng) {
        const double fan_in = static_cast<double>(conv.spec.in_channels) *
                              conv.spec.kernel_size * conv.spec.kernel_size;
        conv.weight.value.fill_normal(rng, static_cast<T>(std::sqrt(2.0 / fan_in)));
        conv.bias.value.fill(T(0));
        conv.weight.reset_state();
        conv.bias.reset_state();
    }

    void check_finite(const Tensor<T>& t, std::size_t block, const char* what) const {
        if (!t.all_finite())
            throw std::runtime_error(msg("model: non-finite values after block ",
                                         block, " ", what));
    }

    Tensor<T> block_forward(Block& block, const Tensor<T>& x, Mode mode,
                            std::size_t index) {
        const bool cache = mode == Mode::train;
        if (cache) block.input = x;
        std::vector<Tensor<T>>& acts = cache ? block.act : scratch_acts_;
        acts.assign(7, Tensor<T>());
        const Tensor<T>* cur = &x;
        for (int i = 0; i < 7; ++i) {
            acts[i] = relu_forward(block.convs[i].forward(*cur));
            check_finite(acts[i], index, "conv layer");
            cur = &acts[i];
        }

        // Residual taps: the narrow chain pairs the even layers, the wide
        // chain the odd ones; without them the last two layers feed through.
        Tensor<T> wide_tap, narrow_tap;
        if (config_.block.lrl_enabled) {
            Tensor<T> narrow = residual_add(acts[0], acts[2]);
            Tensor<T> wide = residual_add(acts[1], acts[3]);
            narrow = residual_add(narrow, acts[4]);
            wide = residual_add(wide, acts[5]);
            narrow = residual_add(narrow, acts[6]);
            wide_tap = std::move(wide);
            narrow_tap = std::move(narrow);
        } else {
            wide_tap = acts[5];
            narrow_tap = acts[6];
        }

        Tensor<T> fuse_input;
        if (config_.block.concat_enabled) {
            Tensor<T> wide_norm = block.bn_wide.forward(wide_tap, mode);
            Tensor<T> narrow_norm = block.bn_narrow.forward(narrow_tap, mode);
            fuse_input = concat_channels<T>({&wide_norm, &narrow_norm});
        } else {
            fuse_input = std::move(narrow_tap);
        }
        if (cache) block.fuse_input = fuse_input;

        Tensor<T> correction = block.fuse.forward(fuse_input);
        check_finite(correction, index, "fusion layer");
        return config_.block.grl_enabled ? residual_add(x, correction)
                                         : correction;
    }

    Tensor<T> block_backward(Block& block, const Tensor<T>& g_out) {
        if (block.act.empty())
            throw std::logic_error("model backward without a training forward");

        Tensor<T> d_fuse_in = block.fuse.backward(block.fuse_input, g_out);

        std::vector<Tensor<T>> d_act;
        d_act.reserve(7);
        for (int i = 0; i < 7; ++i) d_act.emplace_back(block.act[i].shape());

        Tensor<T> d_wide_tap, d_narrow_tap;
        if (config_.block.concat_enabled) {
            auto parts = concat_backward(
                d_fuse_in,
                {config_.block.wide_channels(), config_.block.narrow_channels()});
            d_wide_tap = block.bn_wide.backward(parts[0]);
            d_narrow_tap = block.bn_narrow.backward(parts[1]);
        } else {
            d_narrow_tap = std::move(d_fuse_in);
        }

        auto add_into = [](Tensor<T>& dst, const Tensor<T>& src) {
            const std::int64_t count = static_cast<std::int64_t>(dst.size());
#pragma omp parallel for simd schedule(static) if (dst.size() > kParallelCutoff)
            for (std::int64_t i = 0; i < count; ++i) dst[i] += src[i];
        };
        if (config_.block.lrl_enabled) {
            // Every summand of a chain receives the chain's gradient as-is.
            for (int i : {0, 2, 4, 6}) add_into(d_act[i], d_narrow_tap);
            if (d_wide_tap.size() > 0)
                for (int i : {1, 3, 5}) add_into(d_act[i], d_wide_tap);
        } else {
            add_into(d_act[6], d_narrow_tap);
            if (d_wide_tap.size() > 0) add_into(d_act[5], d_wide_tap);
        }

        for (int i = 6; i >= 1; --i) {
            Tensor<T> d_pre = relu_backward(block.act[i], d_act[i]);
            Tensor<T> d_prev = block.convs[i].backward(block.act[i - 1], d_pre);
            add_into(d_act[i - 1], d_prev);
        }
        Tensor<T> d_pre0 = relu_backward(block.act[0], d_act[0]);
        Tensor<T> d_input = block.convs[0].backward(block.input, d_pre0);
        if (config_.block.grl_enabled) add_into(d_input, g_out);
        return d_input;
    }

    ModelConfig config_;
    std::vector<Block> blocks_;
    std::vector<Tensor<T>> scratch_acts_;  // inference-mode activation scratch
};

}  // namespace mdn
