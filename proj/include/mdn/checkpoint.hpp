#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "mdn/binio.hpp"
#include "mdn/errors.hpp"
#include "mdn/model.hpp"

namespace mdn {

// Checkpoint container: magic MDNC, a version, the resolved model
// configuration, a named parameter manifest followed by raw float32 payloads,
// the normalization running statistics, and (optionally) the Adam state.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kCheckpointHasOptimizer = 1u << 0;

namespace detail {

inline void write_config(std::ostream& out, const ModelConfig& c) {
    binio::put_u32(out, static_cast<std::uint32_t>(c.variant));
    binio::put_u32(out, static_cast<std::uint32_t>(c.num_blocks));
    binio::put_u32(out, static_cast<std::uint32_t>(c.input_channels));
    binio::put_f32(out, c.bn_momentum);
    binio::put_f32(out, c.bn_eps);
    binio::put_u32(out, static_cast<std::uint32_t>(c.block.layer_specs.size()));
    for (const ConvSpec& s : c.block.layer_specs) {
        binio::put_u32(out, static_cast<std::uint32_t>(s.in_channels));
        binio::put_u32(out, static_cast<std::uint32_t>(s.out_channels));
        binio::put_u32(out, static_cast<std::uint32_t>(s.kernel_size));
        binio::put_u32(out, static_cast<std::uint32_t>(s.dilation));
        binio::put_u32(out, static_cast<std::uint32_t>(s.padding));
    }
    binio::put_u32(out, static_cast<std::uint32_t>(c.block.fusion_kernel));
    binio::put_u32(out, (c.block.lrl_enabled ? 1u : 0u) |
                            (c.block.grl_enabled ? 2u : 0u) |
                            (c.block.concat_enabled ? 4u : 0u));
}

inline ModelConfig read_config(std::istream& in, const std::string& ctx) {
    ModelConfig c;
    const std::uint32_t variant = binio::get_u32(in, ctx);
    if (variant > static_cast<std::uint32_t>(Variant::no_concat))
        throw IoError(msg(ctx, ": unknown variant id ", variant));
    c.variant = static_cast<Variant>(variant);
    c.num_blocks = static_cast<int>(binio::get_u32(in, ctx));
    c.input_channels = static_cast<int>(binio::get_u32(in, ctx));
    c.bn_momentum = binio::get_f32(in, ctx);
    c.bn_eps = binio::get_f32(in, ctx);
    const std::uint32_t layers = binio::get_u32(in, ctx);
    if (layers != 7) throw IoError(msg(ctx, ": expected 7 layers, found ", layers));
    c.block.layer_specs.resize(layers);
    for (ConvSpec& s : c.block.layer_specs) {
        s.in_channels = static_cast<int>(binio::get_u32(in, ctx));
        s.out_channels = static_cast<int>(binio::get_u32(in, ctx));
        s.kernel_size = static_cast<int>(binio::get_u32(in, ctx));
        s.dilation = static_cast<int>(binio::get_u32(in, ctx));
        s.padding = static_cast<int>(binio::get_u32(in, ctx));
    }
    c.block.fusion_kernel = static_cast<int>(binio::get_u32(in, ctx));
    const std::uint32_t flags = binio::get_u32(in, ctx);
    c.block.lrl_enabled = flags & 1u;
    c.block.grl_enabled = flags & 2u;
    c.block.concat_enabled = flags & 4u;
    return c;
}

}  // namespace detail

/// Writes parameters, running statistics and (optionally) optimizer moments.
/// Loading the file reproduces the model bit-for-bit.
inline void save_checkpoint(const std::string& path, Model<float>& model,
                            bool with_optimizer_state = true) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(msg("cannot write checkpoint '", path, "'"));
    out.write("MDNC", 4);
    binio::put_u32(out, kCheckpointVersion);
    binio::put_u32(out, with_optimizer_state ? kCheckpointHasOptimizer : 0);
    detail::write_config(out, model.config());

    std::uint32_t param_count = 0;
    model.for_each_parameter(
        [&param_count](const std::string&, Parameter<float>&) { ++param_count; });
    binio::put_u32(out, param_count);
    model.for_each_parameter([&out](const std::string& name, Parameter<float>& p) {
        binio::put_string(out, name);
        binio::put_u32(out, static_cast<std::uint32_t>(p.value.n()));
        binio::put_u32(out, static_cast<std::uint32_t>(p.value.c()));
        binio::put_u32(out, static_cast<std::uint32_t>(p.value.h()));
        binio::put_u32(out, static_cast<std::uint32_t>(p.value.w()));
    });
    model.for_each_parameter([&out](const std::string&, Parameter<float>& p) {
        for (std::size_t i = 0; i < p.value.size(); ++i)
            binio::put_f32(out, p.value[i]);
    });

    std::uint32_t buffer_count = 0;
    model.for_each_buffer(
        [&buffer_count](const std::string&, std::vector<float>&) { ++buffer_count; });
    binio::put_u32(out, buffer_count);
    model.for_each_buffer([&out](const std::string& name, std::vector<float>& b) {
        binio::put_string(out, name);
        binio::put_u32(out, static_cast<std::uint32_t>(b.size()));
    });
    model.for_each_buffer([&out](const std::string&, std::vector<float>& b) {
        for (float v : b) binio::put_f32(out, v);
    });

    if (with_optimizer_state) {
        model.for_each_parameter([&out](const std::string&, Parameter<float>& p) {
            binio::put_u64(out, static_cast<std::uint64_t>(p.step_count));
            for (std::size_t i = 0; i < p.adam_m.size(); ++i)
                binio::put_f32(out, p.adam_m[i]);
            for (std::size_t i = 0; i < p.adam_v.size(); ++i)
                binio::put_f32(out, p.adam_v[i]);
        });
    }
    if (!out) throw IoError(msg("failed while writing checkpoint '", path, "'"));
}

struct LoadedCheckpoint {
    ModelConfig config;
    Model<float> model;
    bool has_optimizer_state = false;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(msg("cannot open checkpoint '", path, "'"));
    const std::string ctx = msg("checkpoint '", path, "'");

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "MDNC")
        throw IoError(msg(ctx, ": bad magic, not a checkpoint"));
    const std::uint32_t version = binio::get_u32(in, ctx);
    if (version != kCheckpointVersion)
        throw IoError(msg(ctx, ": unsupported version ", version));
    const std::uint32_t flags = binio::get_u32(in, ctx);

    LoadedCheckpoint loaded;
    loaded.config = detail::read_config(in, ctx);
    loaded.model = Model<float>(loaded.config);
    loaded.has_optimizer_state = flags & kCheckpointHasOptimizer;

    // The manifest must agree with the model the stored config builds;
    // anything else means corruption or a mismatched producer.
    const std::uint32_t param_count = binio::get_u32(in, ctx);
    std::uint32_t expected = 0;
    loaded.model.for_each_parameter(
        [&expected](const std::string&, Parameter<float>&) { ++expected; });
    if (param_count != expected)
        throw IoError(msg(ctx, ": manifest lists ", param_count,
                          " parameters, config implies ", expected));
    loaded.model.for_each_parameter([&](const std::string& name,
                                        Parameter<float>& p) {
        const std::string stored = binio::get_string(in, ctx);
        if (stored != name)
            throw IoError(msg(ctx, ": manifest mismatch, found '", stored,
                              "' where '", name, "' belongs"));
        const TensorShape shape{static_cast<int>(binio::get_u32(in, ctx)),
                                static_cast<int>(binio::get_u32(in, ctx)),
                                static_cast<int>(binio::get_u32(in, ctx)),
                                static_cast<int>(binio::get_u32(in, ctx))};
        if (!(shape == p.value.shape()))
            throw IoError(msg(ctx, ": parameter '", name, "' has shape ",
                              shape.str(), ", expected ", p.value.shape().str()));
    });
    loaded.model.for_each_parameter([&](const std::string&, Parameter<float>& p) {
        for (std::size_t i = 0; i < p.value.size(); ++i)
            p.value[i] = binio::get_f32(in, ctx);
    });

    const std::uint32_t buffer_count = binio::get_u32(in, ctx);
    std::uint32_t expected_buffers = 0;
    loaded.model.for_each_buffer(
        [&expected_buffers](const std::string&, std::vector<float>&) {
            ++expected_buffers;
        });
    if (buffer_count != expected_buffers)
        throw IoError(msg(ctx, ": manifest lists ", buffer_count,
                          " running-stat buffers, config implies ",
                          expected_buffers));
    loaded.model.for_each_buffer([&](const std::string& name,
                                     std::vector<float>& b) {
        const std::string stored = binio::get_string(in, ctx);
        if (stored != name)
            throw IoError(msg(ctx, ": manifest mismatch, found '", stored,
                              "' where '", name, "' belongs"));
        const std::uint32_t len = binio::get_u32(in, ctx);
        if (len != b.size())
            throw IoError(msg(ctx, ": buffer '", name, "' has ", len,
                              " entries, expected ", b.size()));
    });
    loaded.model.for_each_buffer([&](const std::string&, std::vector<float>& b) {
        for (float& v : b) v = binio::get_f32(in, ctx);
    });

    if (loaded.has_optimizer_state) {
        loaded.model.for_each_parameter([&](const std::string&,
                                            Parameter<float>& p) {
            p.step_count = static_cast<std::int64_t>(binio::get_u64(in, ctx));
            for (std::size_t i = 0; i < p.adam_m.size(); ++i)
                p.adam_m[i] = binio::get_f32(in, ctx);
            for (std::size_t i = 0; i < p.adam_v.size(); ++i)
                p.adam_v[i] = binio::get_f32(in, ctx);
        });
    }
    return loaded;
}

/// Throws unless the stored configuration matches the expected one; used when
/// a caller requires a checkpoint of a specific variant/topology.
inline void require_config_match(const LoadedCheckpoint& loaded,
                                 const ModelConfig& expected,
                                 const std::string& path) {
    const ModelConfig& got = loaded.config;
    if (got.variant != expected.variant || got.num_blocks != expected.num_blocks ||
        got.input_channels != expected.input_channels)
        throw ConfigError(msg("checkpoint '", path, "' holds a ",
                              variant_name(got.variant), " model (",
                              got.num_blocks, " blocks, ", got.input_channels,
                              " channels); expected ",
                              variant_name(expected.variant), " with ",
                              expected.num_blocks, " blocks, ",
                              expected.input_channels, " channels"));
}

}  // namespace mdn
