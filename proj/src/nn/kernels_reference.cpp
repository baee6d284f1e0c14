#include <algorithm>
#include <cstdint>
#include <limits>

#include "fdc/nn/kernels.hpp"

namespace fdc::nn::kernels::reference {

namespace {

inline bool inside(std::int64_t y, std::int64_t x, std::size_t h, std::size_t w) {
    return y >= 0 && x >= 0 && y < static_cast<std::int64_t>(h) && x < static_cast<std::int64_t>(w);
}

}  // namespace

template <typename T>
void conv3x3_forward(std::span<const T> in, std::span<const T> weight, std::span<const T> bias, std::span<T> out,
                     const ConvShape& s) {
    const std::size_t H = s.height, W = s.width;
    for (std::size_t n = 0; n < s.batch; ++n)
        for (std::size_t o = 0; o < s.out_channels; ++o)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    T acc = bias[o];
                    for (std::size_t i = 0; i < s.in_channels; ++i)
                        for (std::int64_t ky = 0; ky < 3; ++ky)
                            for (std::int64_t kx = 0; kx < 3; ++kx) {
                                const std::int64_t yy = static_cast<std::int64_t>(y) + ky - 1;
                                const std::int64_t xx = static_cast<std::int64_t>(x) + kx - 1;
                                if (!inside(yy, xx, H, W)) continue;
                                acc += weight[((o * s.in_channels + i) * 3 + ky) * 3 + kx] *
                                       in[((n * s.in_channels + i) * H + yy) * W + xx];
                            }
                    out[((n * s.out_channels + o) * H + y) * W + x] = acc;
                }
}

template <typename T>
void conv3x3_backward_input(std::span<const T> grad_out, std::span<const T> weight, std::span<T> grad_in,
                            const ConvShape& s) {
    const std::size_t H = s.height, W = s.width;
    std::fill(grad_in.begin(), grad_in.end(), T{0});
    // Scatter form: each output pixel pushes gradient back to its 3x3 inputs.
    for (std::size_t n = 0; n < s.batch; ++n)
        for (std::size_t o = 0; o < s.out_channels; ++o)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const T g = grad_out[((n * s.out_channels + o) * H + y) * W + x];
                    for (std::size_t i = 0; i < s.in_channels; ++i)
                        for (std::int64_t ky = 0; ky < 3; ++ky)
                            for (std::int64_t kx = 0; kx < 3; ++kx) {
                                const std::int64_t yy = static_cast<std::int64_t>(y) + ky - 1;
                                const std::int64_t xx = static_cast<std::int64_t>(x) + kx - 1;
                                if (!inside(yy, xx, H, W)) continue;
                                grad_in[((n * s.in_channels + i) * H + yy) * W + xx] +=
                                    g * weight[((o * s.in_channels + i) * 3 + ky) * 3 + kx];
                            }
                }
}

template <typename T>
void conv3x3_backward_params(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_weight,
                             std::span<T> grad_bias, const ConvShape& s) {
    const std::size_t H = s.height, W = s.width;
    std::fill(grad_weight.begin(), grad_weight.end(), T{0});
    std::fill(grad_bias.begin(), grad_bias.end(), T{0});
    for (std::size_t n = 0; n < s.batch; ++n)
        for (std::size_t o = 0; o < s.out_channels; ++o)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const T g = grad_out[((n * s.out_channels + o) * H + y) * W + x];
                    grad_bias[o] += g;
                    for (std::size_t i = 0; i < s.in_channels; ++i)
                        for (std::int64_t ky = 0; ky < 3; ++ky)
                            for (std::int64_t kx = 0; kx < 3; ++kx) {
                                const std::int64_t yy = static_cast<std::int64_t>(y) + ky - 1;
                                const std::int64_t xx = static_cast<std::int64_t>(x) + kx - 1;
                                if (!inside(yy, xx, H, W)) continue;
                                grad_weight[((o * s.in_channels + i) * 3 + ky) * 3 + kx] +=
                                    g * in[((n * s.in_channels + i) * H + yy) * W + xx];
                            }
                }
}

template <typename T>
void maxpool2x2_forward(std::span<const T> in, std::span<T> out, const PoolShape& s) {
    const std::size_t OH = s.out_height(), OW = s.out_width();
    for (std::size_t p = 0; p < s.batch * s.channels; ++p)
        for (std::size_t y = 0; y < OH; ++y)
            for (std::size_t x = 0; x < OW; ++x) {
                T best = -std::numeric_limits<T>::infinity();
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const T v = in[(p * s.height + 2 * y + dy) * s.width + 2 * x + dx];
                        if (v > best) best = v;
                    }
                out[(p * OH + y) * OW + x] = best;
            }
}

template <typename T>
void maxpool2x2_backward(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_in,
                         const PoolShape& s) {
    const std::size_t OH = s.out_height(), OW = s.out_width();
    std::fill(grad_in.begin(), grad_in.end(), T{0});
    for (std::size_t p = 0; p < s.batch * s.channels; ++p)
        for (std::size_t y = 0; y < OH; ++y)
            for (std::size_t x = 0; x < OW; ++x) {
                // First maximum in row-major window order wins.
                std::size_t arg = 0;
                T best = -std::numeric_limits<T>::infinity();
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = (p * s.height + 2 * y + dy) * s.width + 2 * x + dx;
                        if (in[idx] > best) {
                            best = in[idx];
                            arg = idx;
                        }
                    }
                grad_in[arg] += grad_out[(p * OH + y) * OW + x];
            }
}

template <typename T>
void dense_forward(std::span<const T> in, std::span<const T> weight, std::span<const T> bias, std::span<T> out,
                   const DenseShape& s) {
    for (std::size_t n = 0; n < s.batch; ++n)
        for (std::size_t o = 0; o < s.out_features; ++o) {
            T acc = bias[o];
            for (std::size_t i = 0; i < s.in_features; ++i)
                acc += weight[o * s.in_features + i] * in[n * s.in_features + i];
            out[n * s.out_features + o] = acc;
        }
}

template <typename T>
void dense_backward_input(std::span<const T> grad_out, std::span<const T> weight, std::span<T> grad_in,
                          const DenseShape& s) {
    for (std::size_t n = 0; n < s.batch; ++n)
        for (std::size_t i = 0; i < s.in_features; ++i) {
            T acc = 0;
            for (std::size_t o = 0; o < s.out_features; ++o)
                acc += weight[o * s.in_features + i] * grad_out[n * s.out_features + o];
            grad_in[n * s.in_features + i] = acc;
        }
}

template <typename T>
void dense_backward_params(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_weight,
                           std::span<T> grad_bias, const DenseShape& s) {
    for (std::size_t o = 0; o < s.out_features; ++o) {
        T gb = 0;
        for (std::size_t n = 0; n < s.batch; ++n) gb += grad_out[n * s.out_features + o];
        grad_bias[o] = gb;
        for (std::size_t i = 0; i < s.in_features; ++i) {
            T acc = 0;
            for (std::size_t n = 0; n < s.batch; ++n)
                acc += grad_out[n * s.out_features + o] * in[n * s.in_features + i];
            grad_weight[o * s.in_features + i] = acc;
        }
    }
}

template <typename T>
void relu_forward(std::span<const T> in, std::span<T> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0 ? in[i] : T{0};
}

template <typename T>
void relu_backward(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_in) {
    for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] = in[i] > 0 ? grad_out[i] : T{0};
}

#define FDC_INSTANTIATE(T)                                                                                   \
    template void conv3x3_forward<T>(std::span<const T>, std::span<const T>, std::span<const T>, std::span<T>, \
                                     const ConvShape&);                                                     \
    template void conv3x3_backward_input<T>(std::span<const T>, std::span<const T>, std::span<T>,            \
                                            const ConvShape&);                                              \
    template void conv3x3_backward_params<T>(std::span<const T>, std::span<const T>, std::span<T>,           \
                                             std::span<T>, const ConvShape&);                               \
    template void maxpool2x2_forward<T>(std::span<const T>, std::span<T>, const PoolShape&);                 \
    template void maxpool2x2_backward<T>(std::span<const T>, std::span<const T>, std::span<T>,               \
                                         const PoolShape&);                                                 \
    template void dense_forward<T>(std::span<const T>, std::span<const T>, std::span<const T>, std::span<T>, \
                                   const DenseShape&);                                                      \
    template void dense_backward_input<T>(std::span<const T>, std::span<const T>, std::span<T>,              \
                                          const DenseShape&);                                               \
    template void dense_backward_params<T>(std::span<const T>, std::span<const T>, std::span<T>,             \
                                           std::span<T>, const DenseShape&);                                \
    template void relu_forward<T>(std::span<const T>, std::span<T>);                                         \
    template void relu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);

FDC_INSTANTIATE(float)
FDC_INSTANTIATE(double)

}  // namespace fdc::nn::kernels::reference
