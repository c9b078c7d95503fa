#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectralnet/tensor.hpp"

namespace spectralnet {

// The four 2x2 analysis kernels, applied as correlations (no flip):
//   LL = [ 1  1; 1  1]   LH = [-1 -1; 1  1]
//   HL = [-1  1;-1  1]   HH = [ 1 -1;-1  1]
// Flattened they are mutually orthogonal with squared norm 4, so the
// transform is invertible with a single 1/4 in the inverse and no
// normalization on the forward pass.
struct HaarKernels {
    static constexpr std::array<std::array<double, 4>, 4> kernels = {{
        {1.0, 1.0, 1.0, 1.0},     // LL
        {-1.0, -1.0, 1.0, 1.0},   // LH
        {-1.0, 1.0, -1.0, 1.0},   // HL
        {1.0, -1.0, -1.0, 1.0},   // HH
    }};
    static constexpr std::size_t kCount = 4;
};

struct HaarSubbands {
    Tensor ll, lh, hl, hh;

    const Tensor& operator[](std::size_t i) const {
        switch (i) {
            case 0: return ll;
            case 1: return lh;
            case 2: return hl;
            case 3: return hh;
        }
        throw std::out_of_range("HaarSubbands: index must be in [0,4)");
    }
};

// One HaarSubbands set per level; level t+1 is the decomposition of level
// t's LL band, so level t has spatial extent (H/2^t, W/2^t).
struct WaveletPyramid {
    std::vector<HaarSubbands> levels;
    std::array<std::size_t, 3> source_shape;  // (C, H, W)
};

// Stride-2 valid correlation of each channel with the four kernels.
// Each output element accumulates the four taps in row-major kernel order,
// matching the summation order of conv2d exactly.
inline HaarSubbands haar_forward(const Tensor& image) {
    if (image.rank() != 3)
        throw std::invalid_argument("haar_forward: image must be [C,H,W]");
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (H % 2 != 0 || W % 2 != 0)
        throw std::invalid_argument("haar_forward: spatial dims must be even, got " +
                                    std::to_string(H) + "x" + std::to_string(W));

    const std::size_t Ho = H / 2, Wo = W / 2;
    HaarSubbands sb;
    Tensor* bands[4] = {&sb.ll, &sb.lh, &sb.hl, &sb.hh};
    for (Tensor* b : bands) *b = Tensor::zeros({C, Ho, Wo});

    const double* x = image.data();
    for (std::size_t k = 0; k < HaarKernels::kCount; ++k) {
        const auto& ker = HaarKernels::kernels[k];
        double* y = bands[k]->data();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < Ho; ++i)
                for (std::size_t j = 0; j < Wo; ++j) {
                    const std::size_t r = 2 * i, s = 2 * j;
                    double acc = 0.0;
                    acc += ker[0] * x[(c * H + r) * W + s];
                    acc += ker[1] * x[(c * H + r) * W + s + 1];
                    acc += ker[2] * x[(c * H + r + 1) * W + s];
                    acc += ker[3] * x[(c * H + r + 1) * W + s + 1];
                    y[(c * Ho + i) * Wo + j] = acc;
                }
    }
    return sb;
}

// Exact inverse: x = (LL*kLL + LH*kLH + HL*kHL + HH*kHH) / 4 per 2x2 block.
inline Tensor haar_inverse(const HaarSubbands& sb) {
    const Tensor* bands[4] = {&sb.ll, &sb.lh, &sb.hl, &sb.hh};
    for (std::size_t i = 1; i < 4; ++i)
        if (bands[i]->shape() != bands[0]->shape())
            throw std::invalid_argument("haar_inverse: subband shapes disagree");
    if (sb.ll.rank() != 3)
        throw std::invalid_argument("haar_inverse: subbands must be [C,H,W]");

    const std::size_t C = sb.ll.dim(0), Hs = sb.ll.dim(1), Ws = sb.ll.dim(2);
    Tensor out = Tensor::zeros({C, 2 * Hs, 2 * Ws});
    double* x = out.data();
    const std::size_t H = 2 * Hs, W = 2 * Ws;

    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < Hs; ++i)
            for (std::size_t j = 0; j < Ws; ++j) {
                const std::size_t si = (c * Hs + i) * Ws + j;
                for (std::size_t tap = 0; tap < 4; ++tap) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < 4; ++k)
                        acc += HaarKernels::kernels[k][tap] * bands[k]->data()[si];
                    const std::size_t r = 2 * i + tap / 2, s = 2 * j + tap % 2;
                    x[(c * H + r) * W + s] = acc / 4.0;
                }
            }
    return out;
}

// Recursive decomposition: level 1 transforms the image, each further
// level transforms the previous LL band.
inline WaveletPyramid haar_pyramid(const Tensor& image, int levels) {
    if (levels < 1) throw std::invalid_argument("haar_pyramid: levels must be positive");
    if (image.rank() != 3)
        throw std::invalid_argument("haar_pyramid: image must be [C,H,W]");
    const std::size_t H = image.dim(1), W = image.dim(2);
    const std::size_t div = std::size_t(1) << levels;
    if (H % div != 0 || W % div != 0)
        throw std::invalid_argument("haar_pyramid: " + std::to_string(H) + "x" +
                                    std::to_string(W) + " not divisible by 2^" +
                                    std::to_string(levels));

    WaveletPyramid pyr;
    pyr.source_shape = {image.dim(0), H, W};
    pyr.levels.reserve(static_cast<std::size_t>(levels));
    Tensor current = image;
    for (int t = 0; t < levels; ++t) {
        pyr.levels.push_back(haar_forward(current));
        current = pyr.levels.back().ll;
    }
    return pyr;
}

// Largest level count allowed by the spatial extents.
inline int max_haar_levels(std::size_t h, std::size_t w) {
    int levels = 0;
    while (h % 2 == 0 && w % 2 == 0 && h > 0 && w > 0) {
        ++levels;
        h /= 2;
        w /= 2;
    }
    return levels;
}

}  // namespace spectralnet
