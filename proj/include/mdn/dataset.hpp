#pragma once

#include <algorithm>
#include <filesystem>
#include <regex>
#include <string>
#include <vector>

#include "mdn/errors.hpp"
#include "mdn/image_io.hpp"
#include "mdn/kspace.hpp"
#include "mdn/rng.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

/// An in-memory training corpus: grayscale items as 1x1xHxW tensors in [0,1],
/// or complex items as 1x2xHxW. All items share one size.
struct Dataset {
    std::vector<Tensor<float>> items;
    std::vector<std::string> sources;
    int channels = 1;
    int height = 0;
    int width = 0;
    std::vector<int> rotations_applied;  // quarter turns used for augmentation

    std::size_t size() const { return items.size(); }
};

namespace detail {

inline std::regex glob_to_regex(const std::string& glob) {
    std::string re;
    for (char c : glob) {
        switch (c) {
            case '*': re += ".*"; break;
            case '?': re += "."; break;
            case '.': re += "\\."; break;
            case '[':
            case ']':
            case '-': re += c; break;  // character classes pass through
            default:
                if (std::isalnum(static_cast<unsigned char>(c)))
                    re += c;
                else {
                    re += '\\';
                    re += c;
                }
        }
    }
    return std::regex(re);
}

/// Per-image max normalization into [0,1].
inline Tensor<float> normalize_gray(const GrayImage& img) {
    Tensor<float> t(1, 1, img.height, img.width);
    std::uint16_t max_raw = 0;
    for (std::uint16_t v : img.pixels) max_raw = std::max(max_raw, v);
    const float scale = max_raw > 0 ? 1.0f / max_raw : 0.0f;
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        t[i] = img.pixels[i] * scale;
    return t;
}

inline Tensor<float> normalize_complex(const ComplexImage& img) {
    float max_mag = 0.0f;
    for (const auto& z : img.data) max_mag = std::max(max_mag, std::abs(z));
    ComplexImage scaled = img;
    if (max_mag > 0.0f)
        for (auto& z : scaled.data) z /= max_mag;
    return complex_to_channels(scaled);
}

}  // namespace detail

/// Loads every file in `directory` matching `pattern` (shell-style glob on
/// the file name). Graymaps load as real items, CIMG files as complex ones;
/// the two cannot mix. Ordering is by sorted path, so reloading a directory
/// reproduces the same dataset.
inline Dataset load_dataset(const std::string& directory,
                            const std::string& pattern = "*") {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory))
        throw IoError(msg("'", directory, "' is not a readable directory"));

    std::vector<std::string> paths;
    const std::regex matcher = detail::glob_to_regex(pattern);
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        const std::string ext = entry.path().extension().string();
        if (ext != ".pgm" && ext != ".cimg") continue;
        if (!std::regex_match(name, matcher)) continue;
        paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty())
        throw IoError(msg("no images found in '", directory, "' matching '",
                          pattern, "'"));

    Dataset ds;
    for (const std::string& path : paths) {
        Tensor<float> item;
        if (path.size() >= 5 && path.substr(path.size() - 5) == ".cimg")
            item = detail::normalize_complex(read_cimg(path));
        else
            item = detail::normalize_gray(read_pgm(path));

        if (ds.items.empty()) {
            ds.channels = item.c();
            ds.height = item.h();
            ds.width = item.w();
        } else if (item.c() != ds.channels) {
            throw IoError(msg("'", path, "' mixes complex and real images in one ",
                              "dataset"));
        } else if (item.h() != ds.height || item.w() != ds.width) {
            throw IoError(msg("'", path, "' is ", item.h(), "x", item.w(),
                              " but the dataset is ", ds.height, "x", ds.width));
        }
        ds.items.push_back(std::move(item));
        ds.sources.push_back(path);
    }
    return ds;
}

namespace detail {

/// One clockwise quarter turn.
inline Tensor<float> rotate90(const Tensor<float>& t) {
    Tensor<float> out(t.n(), t.c(), t.w(), t.h());
    for (int n = 0; n < t.n(); ++n)
        for (int c = 0; c < t.c(); ++c)
            for (int y = 0; y < t.h(); ++y)
                for (int x = 0; x < t.w(); ++x)
                    out.at(n, c, x, t.h() - 1 - y) = t.at(n, c, y, x);
    return out;
}

inline Tensor<float> rotate_quarter_turns(const Tensor<float>& t, int turns) {
    Tensor<float> out = t;
    for (int i = 0; i < turns; ++i) out = rotate90(out);
    return out;
}

}  // namespace detail

/// Appends rotated copies of every item; angles are quarter turns
/// (90, 180, 270 degrees). The expanded count is items * (1 + |angles|).
inline Dataset augment_rotations(const Dataset& ds, const std::vector<int>& angles) {
    for (int angle : angles) {
        if (angle != 90 && angle != 180 && angle != 270)
            throw ConfigError(msg("augmentation angle must be 90, 180 or 270, got ",
                                  angle));
        if (angle != 180 && ds.height != ds.width)
            throw ConfigError(msg("cannot rotate ", ds.height, "x", ds.width,
                                  " items by ", angle,
                                  " degrees and keep one dataset size"));
    }
    Dataset out = ds;
    for (int angle : angles) {
        const int turns = angle / 90;
        for (std::size_t i = 0; i < ds.items.size(); ++i) {
            out.items.push_back(detail::rotate_quarter_turns(ds.items[i], turns));
            out.sources.push_back(msg(ds.sources[i], "#rot", angle));
        }
        out.rotations_applied.push_back(angle);
    }
    return out;
}

/// Deterministic random crops for desk-scale runs; one crop per item.
inline Dataset crop_dataset(const Dataset& ds, int crop, std::uint64_t seed) {
    if (crop <= 0 || crop > ds.height || crop > ds.width)
        throw ConfigError(msg("crop ", crop, " does not fit ", ds.height, "x",
                              ds.width, " items"));
    auto rng = make_engine(seed, 0xC409);
    Dataset out;
    out.channels = ds.channels;
    out.height = crop;
    out.width = crop;
    out.rotations_applied = ds.rotations_applied;
    std::uniform_int_distribution<int> dy(0, ds.height - crop);
    std::uniform_int_distribution<int> dx(0, ds.width - crop);
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const int oy = dy(rng), ox = dx(rng);
        const Tensor<float>& src = ds.items[i];
        Tensor<float> item(1, src.c(), crop, crop);
        for (int c = 0; c < src.c(); ++c)
            for (int y = 0; y < crop; ++y)
                for (int x = 0; x < crop; ++x)
                    item.at(0, c, y, x) = src.at(0, c, oy + y, ox + x);
        out.items.push_back(std::move(item));
        out.sources.push_back(msg(ds.sources[i], "#crop", oy, ",", ox));
    }
    return out;
}

/// FNV-1a over dimensions and payload bytes, for run manifests.
inline std::uint64_t dataset_hash(const Dataset& ds) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    const int dims[3] = {ds.channels, ds.height, ds.width};
    mix(dims, sizeof(dims));
    for (const Tensor<float>& item : ds.items)
        mix(item.data(), item.size() * sizeof(float));
    return h;
}

}  // namespace mdn
