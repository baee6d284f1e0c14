#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fdc/nn/kernels.hpp"

namespace fdc::nn::kernels {

void set_thread_count(int threads) {
#ifdef _OPENMP
    omp_set_num_threads(std::max(1, threads));
#else
    (void)threads;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace parallel {

namespace {

using Index = std::int64_t;

template <typename T>
inline T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
    T s = 0;
#pragma omp simd reduction(+ : s)
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
inline void axpy(T* __restrict y, const T* __restrict x, T a, std::size_t n) {
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

// Conv kernels work on zero-bordered planes of (H + 2) x (W + 2). With row
// stride PW = W + 2 a 3x3 tap becomes a constant offset, so every tap is one
// long contiguous loop over H * PW positions; the two extra columns per row
// are junk and get dropped when copying out.
template <typename T>
std::vector<T> pad_planes(const T* src, std::size_t planes, std::size_t H, std::size_t W) {
    const std::size_t PW = W + 2, PHW = (H + 2) * PW;
    std::vector<T> padded(planes * PHW + 2, T{0});  // +2: junk columns of the last row read past the plane
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < static_cast<Index>(planes); ++p) {
        const T* s = src + static_cast<std::size_t>(p) * H * W;
        T* d = padded.data() + static_cast<std::size_t>(p) * PHW + PW + 1;
        for (std::size_t y = 0; y < H; ++y) std::copy(s + y * W, s + (y + 1) * W, d + y * PW);
    }
    return padded;
}

// acc[j] += k0 p[j] + k1 p[j + 1] + k2 p[j + 2]
template <typename T>
inline void taps3(T* __restrict acc, const T* __restrict p, std::size_t n, T k0, T k1, T k2) {
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) acc[j] += k0 * p[j] + k1 * p[j + 1] + k2 * p[j + 2];
}

template <typename T>
void conv3x3_forward(std::span<const T> in, std::span<const T> weight, std::span<const T> bias, std::span<T> out,
                     const ConvShape& s) {
    const std::size_t H = s.height, W = s.width, HW = H * W;
    const std::size_t PW = W + 2, PHW = (H + 2) * PW, FLAT = H * PW;
    const std::size_t IC = s.in_channels, OC = s.out_channels;
    const std::vector<T> padded = pad_planes(in.data(), s.batch * IC, H, W);
    const Index planes = static_cast<Index>(s.batch * OC);
#pragma omp parallel
    {
        std::vector<T> acc(FLAT);
#pragma omp for schedule(static)
        for (Index p = 0; p < planes; ++p) {
            const std::size_t n = static_cast<std::size_t>(p) / OC, o = static_cast<std::size_t>(p) % OC;
            std::fill(acc.begin(), acc.end(), bias[o]);
            for (std::size_t i = 0; i < IC; ++i) {
                const T* src = padded.data() + (n * IC + i) * PHW;
                const T* k = weight.data() + (o * IC + i) * 9;
                for (std::size_t ky = 0; ky < 3; ++ky)
                    taps3(acc.data(), src + ky * PW, FLAT, k[ky * 3], k[ky * 3 + 1], k[ky * 3 + 2]);
            }
            T* dst = out.data() + static_cast<std::size_t>(p) * HW;
            for (std::size_t y = 0; y < H; ++y) std::copy_n(acc.data() + y * PW, W, dst + y * W);
        }
    }
}

template <typename T>
void conv3x3_backward_input(std::span<const T> grad_out, std::span<const T> weight, std::span<T> grad_in,
                            const ConvShape& s) {
    const std::size_t H = s.height, W = s.width, HW = H * W;
    const std::size_t PW = W + 2, PHW = (H + 2) * PW, FLAT = H * PW;
    const std::size_t IC = s.in_channels, OC = s.out_channels;
    const std::vector<T> padded = pad_planes(grad_out.data(), s.batch * OC, H, W);
    const Index planes = static_cast<Index>(s.batch * IC);
#pragma omp parallel
    {
        std::vector<T> acc(FLAT);
#pragma omp for schedule(static)
        for (Index p = 0; p < planes; ++p) {
            const std::size_t n = static_cast<std::size_t>(p) / IC, i = static_cast<std::size_t>(p) % IC;
            std::fill(acc.begin(), acc.end(), T{0});
            // Transposed conv: the same tap loop with the kernel rotated by 180 degrees.
            for (std::size_t o = 0; o < OC; ++o) {
                const T* g = padded.data() + (n * OC + o) * PHW;
                const T* k = weight.data() + (o * IC + i) * 9;
                for (std::size_t ky = 0; ky < 3; ++ky)
                    taps3(acc.data(), g + ky * PW, FLAT, k[(2 - ky) * 3 + 2], k[(2 - ky) * 3 + 1], k[(2 - ky) * 3]);
            }
            T* dst = grad_in.data() + static_cast<std::size_t>(p) * HW;
            for (std::size_t y = 0; y < H; ++y) std::copy_n(acc.data() + y * PW, W, dst + y * W);
        }
    }
}

template <typename T>
void conv3x3_backward_params(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_weight,
                             std::span<T> grad_bias, const ConvShape& s) {
    const std::size_t H = s.height, W = s.width, HW = H * W;
    const std::size_t PW = W + 2, PHW = (H + 2) * PW, FLAT = H * PW;
    const std::size_t IC = s.in_channels, OC = s.out_channels;
    const std::vector<T> padded_in = pad_planes(in.data(), s.batch * IC, H, W);
    // Read at offset PW + 1 this is grad_out with zeros in the junk columns.
    const std::vector<T> padded_g = pad_planes(grad_out.data(), s.batch * OC, H, W);
    const Index pairs = static_cast<Index>(OC * IC);
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < pairs; ++p) {
        const std::size_t o = static_cast<std::size_t>(p) / IC, i = static_cast<std::size_t>(p) % IC;
        T acc[9] = {};
        for (std::size_t n = 0; n < s.batch; ++n) {
            const T* g = padded_g.data() + (n * OC + o) * PHW + PW + 1;
            const T* src = padded_in.data() + (n * IC + i) * PHW;
            for (std::size_t k = 0; k < 9; ++k) acc[k] += dot(g, src + (k / 3) * PW + k % 3, FLAT);
        }
        std::copy(acc, acc + 9, grad_weight.data() + static_cast<std::size_t>(p) * 9);
    }
#pragma omp parallel for schedule(static)
    for (Index o = 0; o < static_cast<Index>(OC); ++o) {
        T b = 0;
        for (std::size_t n = 0; n < s.batch; ++n) {
            const T* g = grad_out.data() + (n * OC + static_cast<std::size_t>(o)) * HW;
            T plane = 0;
#pragma omp simd reduction(+ : plane)
            for (std::size_t k = 0; k < HW; ++k) plane += g[k];
            b += plane;
        }
        grad_bias[static_cast<std::size_t>(o)] = b;
    }
}

template <typename T>
void maxpool2x2_forward(std::span<const T> in, std::span<T> out, const PoolShape& s) {
    const std::size_t OH = s.out_height(), OW = s.out_width();
    const Index planes = static_cast<Index>(s.batch * s.channels);
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < planes; ++p) {
        const T* src = in.data() + static_cast<std::size_t>(p) * s.height * s.width;
        T* dst = out.data() + static_cast<std::size_t>(p) * OH * OW;
        for (std::size_t y = 0; y < OH; ++y) {
            const T* r0 = src + 2 * y * s.width;
            const T* r1 = r0 + s.width;
            for (std::size_t x = 0; x < OW; ++x) {
                T best = r0[2 * x];
                if (r0[2 * x + 1] > best) best = r0[2 * x + 1];
                if (r1[2 * x] > best) best = r1[2 * x];
                if (r1[2 * x + 1] > best) best = r1[2 * x + 1];
                dst[y * OW + x] = best;
            }
        }
    }
}

template <typename T>
void maxpool2x2_backward(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_in,
                         const PoolShape& s) {
    const std::size_t OH = s.out_height(), OW = s.out_width();
    const Index planes = static_cast<Index>(s.batch * s.channels);
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < planes; ++p) {
        const std::size_t plane = static_cast<std::size_t>(p) * s.height * s.width;
        const T* src = in.data() + plane;
        T* dst = grad_in.data() + plane;
        std::fill(dst, dst + s.height * s.width, T{0});
        const T* g = grad_out.data() + static_cast<std::size_t>(p) * OH * OW;
        for (std::size_t y = 0; y < OH; ++y)
            for (std::size_t x = 0; x < OW; ++x) {
                // Same tie rule as the reference: first maximum in row-major order.
                std::size_t arg = 2 * y * s.width + 2 * x;
                T best = src[arg];
                for (std::size_t k : {arg + 1, arg + s.width, arg + s.width + 1})
                    if (src[k] > best) {
                        best = src[k];
                        arg = k;
                    }
                dst[arg] += g[y * OW + x];
            }
    }
}

template <typename T>
void dense_forward(std::span<const T> in, std::span<const T> weight, std::span<const T> bias, std::span<T> out,
                   const DenseShape& s) {
    const std::size_t I = s.in_features, O = s.out_features;
    const Index cells = static_cast<Index>(s.batch * O);
#pragma omp parallel for schedule(static)
    for (Index c = 0; c < cells; ++c) {
        const std::size_t n = static_cast<std::size_t>(c) / O, o = static_cast<std::size_t>(c) % O;
        out[static_cast<std::size_t>(c)] = bias[o] + dot(weight.data() + o * I, in.data() + n * I, I);
    }
}

template <typename T>
void dense_backward_input(std::span<const T> grad_out, std::span<const T> weight, std::span<T> grad_in,
                          const DenseShape& s) {
    const std::size_t I = s.in_features, O = s.out_features;
#pragma omp parallel for schedule(static)
    for (Index n = 0; n < static_cast<Index>(s.batch); ++n) {
        T* dst = grad_in.data() + static_cast<std::size_t>(n) * I;
        std::fill(dst, dst + I, T{0});
        for (std::size_t o = 0; o < O; ++o)
            axpy(dst, weight.data() + o * I, grad_out[static_cast<std::size_t>(n) * O + o], I);
    }
}

template <typename T>
void dense_backward_params(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_weight,
                           std::span<T> grad_bias, const DenseShape& s) {
    const std::size_t I = s.in_features, O = s.out_features;
#pragma omp parallel for schedule(static)
    for (Index oi = 0; oi < static_cast<Index>(O); ++oi) {
        const std::size_t o = static_cast<std::size_t>(oi);
        T* dst = grad_weight.data() + o * I;
        std::fill(dst, dst + I, T{0});
        T b = 0;
        for (std::size_t n = 0; n < s.batch; ++n) {
            const T g = grad_out[n * O + o];
            b += g;
            axpy(dst, in.data() + n * I, g, I);
        }
        grad_bias[o] = b;
    }
}

template <typename T>
void relu_forward(std::span<const T> in, std::span<T> out) {
    const Index n = static_cast<Index>(in.size());
#pragma omp parallel for simd schedule(static)
    for (Index i = 0; i < n; ++i) out[i] = in[i] > 0 ? in[i] : T{0};
}

template <typename T>
void relu_backward(std::span<const T> in, std::span<const T> grad_out, std::span<T> grad_in) {
    const Index n = static_cast<Index>(in.size());
#pragma omp parallel for simd schedule(static)
    for (Index i = 0; i < n; ++i) grad_in[i] = in[i] > 0 ? grad_out[i] : T{0};
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

}  // namespace parallel

}  // namespace fdc::nn::kernels
