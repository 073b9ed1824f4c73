#pragma once

#include <cmath>
#include <cstdint>

#include "mdn/errors.hpp"
#include "mdn/kspace.hpp"
#include "mdn/mask.hpp"
#include "mdn/resize.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

enum class TaskKind { csmri, csmri_noisy, superres };

inline const char* task_name(TaskKind k) {
    switch (k) {
        case TaskKind::csmri: return "csmri";
        case TaskKind::csmri_noisy: return "csmri-noisy";
        case TaskKind::superres: return "superres";
    }
    return "?";
}

/// What to reconstruct from: undersampled k-space, noisy undersampled
/// k-space, or a bicubic low-resolution image at the original size.
struct TaskSpec {
    TaskKind kind = TaskKind::csmri;
    SamplingMask mask;       // csmri kinds
    double noise_v = 0.0;    // csmri_noisy
    int scale = 2;           // superres: 2, 3 or 4
    bool fresh_mask_per_sample = false;

    void validate() const {
        switch (kind) {
            case TaskKind::csmri:
                if (mask.height <= 0)
                    throw ConfigError("csmri task needs a sampling mask");
                break;
            case TaskKind::csmri_noisy:
                if (mask.height <= 0)
                    throw ConfigError("csmri-noisy task needs a sampling mask");
                if (noise_v < 0)
                    throw ConfigError(msg("noise stddev must be >= 0, got ",
                                          noise_v));
                break;
            case TaskKind::superres:
                if (scale != 2 && scale != 3 && scale != 4)
                    throw ConfigError(msg("super-resolution scale must be 2, 3 or ",
                                          "4, got ", scale));
                break;
        }
    }
};

template <typename T>
struct TrainingPair {
    Tensor<T> input;
    Tensor<T> target;
};

namespace detail {

inline Tensor<float> zero_fill_input(const Tensor<float>& image,
                                     const SamplingMask& mask, double noise_v,
                                     std::uint64_t seed) {
    if (image.h() != mask.height || image.w() != mask.width)
        throw ShapeError(msg("make_pair: image is ", image.h(), "x", image.w(),
                             " but mask is ", mask.height, "x", mask.width));
    // A fully sampled, noiseless acquisition is the identity; skip the
    // transform pair so the identity is exact rather than within roundoff.
    if (noise_v == 0.0 && mask.ones() == mask.bits.size()) return image;

    const bool complex_input = image.c() == 2;
    ComplexImage img = complex_input ? channels_to_complex(image)
                                     : image_from_real(image);
    KSpaceGrid y = undersample(img, mask);
    if (noise_v > 0.0) y = add_measurement_noise(y, mask, noise_v, seed);
    ComplexImage x_u = zero_fill(y);
    return complex_input ? complex_to_channels(x_u) : magnitude_tensor(x_u);
}

}  // namespace detail

/// Builds one (network input, target) pair from a ground-truth image.
inline TrainingPair<float> make_pair(const Tensor<float>& image,
                                     const TaskSpec& task, std::uint64_t seed) {
    task.validate();
    switch (task.kind) {
        case TaskKind::csmri:
            return {detail::zero_fill_input(image, task.mask, 0.0, seed), image};
        case TaskKind::csmri_noisy:
            return {detail::zero_fill_input(image, task.mask, task.noise_v, seed),
                    image};
        case TaskKind::superres: {
            if (image.c() != 1)
                throw ConfigError("super-resolution pairs need real-valued images");
            const int low_h = std::max(1, (image.h() + task.scale / 2) / task.scale);
            const int low_w = std::max(1, (image.w() + task.scale / 2) / task.scale);
            Tensor<float> low = resize_bicubic(image, low_h, low_w);
            return {resize_bicubic(low, image.h(), image.w()), image};
        }
    }
    throw ConfigError("unreachable task kind");
}

}  // namespace mdn
