#pragma once

#include <cstddef>
#include <span>

// Layer kernels in two flavours with identical signatures:
//   reference  - plain serial loops, kept as the test oracle
//   parallel   - OpenMP over independent outputs (batch x channel planes)
//
// Every parallel kernel gives each output element to exactly one thread and
// accumulates in a fixed order, so results do not depend on thread count.
namespace fdc::nn::kernels {

// NCHW activations, OIHW 3x3 weights, stride 1, zero padding 1.
struct ConvShape {
    std::size_t batch, in_channels, out_channels, height, width;
};

// 2x2 window, stride 2; trailing odd row/column is dropped.
struct PoolShape {
    std::size_t batch, channels, height, width;
    std::size_t out_height() const noexcept { return height / 2; }
    std::size_t out_width() const noexcept { return width / 2; }
};

struct DenseShape {
    std::size_t batch, in_features, out_features;
};

#define FDC_DECLARE_KERNELS                                                                             \
    template <typename T>                                                                               \
    void conv3x3_forward(std::span<const T> in, std::span<const T> weight, std::span<const T> bias,    \
                         std::span<T> out, const ConvShape& s);                                        \
    template <typename T>                                                                               \
    void conv3x3_backward_input(std::span<const T> grad_out, std::span<const T> weight,                \
                                std::span<T> grad_in, const ConvShape& s);                             \
    template <typename T>                                                                               \
    void conv3x3_backward_params(std::span<const T> in, std::span<const T> grad_out,                   \
                                 std::span<T> grad_weight, std::span<T> grad_bias, const ConvShape& s); \
    template <typename T>                                                                               \
    void maxpool2x2_forward(std::span<const T> in, std::span<T> out, const PoolShape& s);              \
    template <typename T>                                                                               \
    void maxpool2x2_backward(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_in, \
                             const PoolShape& s);                                                       \
    template <typename T>                                                                               \
    void dense_forward(std::span<const T> in, std::span<const T> weight, std::span<const T> bias,      \
                       std::span<T> out, const DenseShape& s);                                         \
    template <typename T>                                                                               \
    void dense_backward_input(std::span<const T> grad_out, std::span<const T> weight,                  \
                              std::span<T> grad_in, const DenseShape& s);                              \
    template <typename T>                                                                               \
    void dense_backward_params(std::span<const T> in, std::span<const T> grad_out,                     \
                               std::span<T> grad_weight, std::span<T> grad_bias, const DenseShape& s); \
    template <typename T>                                                                               \
    void relu_forward(std::span<const T> in, std::span<T> out);                                        \
    template <typename T>                                                                               \
    void relu_backward(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_in);

namespace reference {
FDC_DECLARE_KERNELS
}

namespace parallel {
FDC_DECLARE_KERNELS
}

#undef FDC_DECLARE_KERNELS

void set_thread_count(int threads);
int thread_count();

}  // namespace fdc::nn::kernels
