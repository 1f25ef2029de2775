#include "mpda/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

namespace mpda {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void expect_dim(const Shape& shape, std::size_t dims, const char* op)
{
    if (shape.size() != dims)
        throw DimensionError(std::string(op) + ": expected " + std::to_string(dims) + "-d input, got " +
                             shape_str(shape));
}

void expect_axis(const char* op, const char* axis, std::size_t got, std::size_t want)
{
    if (got != want)
        throw DimensionError(std::string(op) + ": axis " + axis + " is " + std::to_string(got) + ", expected " +
                             std::to_string(want));
}

template <typename T>
void ensure_grad(BasicTensor<T>& t)
{
    if (!t.empty())
        t.require_grad();
}

struct ConvGeometry {
    std::size_t n, c_in, h, w, c_out, k, pad;
    std::size_t hw() const { return h * w; }
    std::size_t patch() const { return c_in * k * k; }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicLayerParams<T>& params)
{
    expect_dim(input.shape(), 4, "conv2d");
    const Shape& ws = params.weights.shape();
    if (ws.size() != 4)
        throw DimensionError("conv2d: weights must be [C_out,C_in,k,k], got " + shape_str(ws));
    expect_axis("conv2d", "C (input channels)", input.shape()[1], ws[1]);
    if (ws[2] != ws[3] || ws[2] % 2 == 0)
        throw DimensionError("conv2d: kernel must be square and odd, got " + shape_str(ws));
    if (params.bias.numel() != ws[0])
        throw DimensionError("conv2d: bias length " + std::to_string(params.bias.numel()) + " != C_out " +
                             std::to_string(ws[0]));
    const auto& s = input.shape();
    return {s[0], s[1], s[2], s[3], ws[0], ws[2], ws[2] / 2};
}

// col[(c*k + ky)*k + kx][y*w + x] = in[c][y+ky-pad][x+kx-pad], zero outside.
template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* col)
{
    const auto H = static_cast<long>(g.h), W = static_cast<long>(g.w), P = static_cast<long>(g.pad);
    for (std::size_t c = 0; c < g.c_in; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                T* row = col + ((c * g.k + ky) * g.k + kx) * g.hw();
                const T* plane = in + c * g.hw();
                const long dy = static_cast<long>(ky) - P, dx = static_cast<long>(kx) - P;
                for (long y = 0; y < H; ++y) {
                    const long sy = y + dy;
                    T* dst = row + y * W;
                    if (sy < 0 || sy >= H) {
                        std::fill(dst, dst + W, T(0));
                        continue;
                    }
                    const T* src = plane + sy * W;
                    for (long x = 0; x < W; ++x) {
                        const long sx = x + dx;
                        dst[x] = (sx >= 0 && sx < W) ? src[sx] : T(0);
                    }
                }
            }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* in)
{
    const auto H = static_cast<long>(g.h), W = static_cast<long>(g.w), P = static_cast<long>(g.pad);
    for (std::size_t c = 0; c < g.c_in; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const T* row = col + ((c * g.k + ky) * g.k + kx) * g.hw();
                T* plane = in + c * g.hw();
                const long dy = static_cast<long>(ky) - P, dx = static_cast<long>(kx) - P;
                for (long y = 0; y < H; ++y) {
                    const long sy = y + dy;
                    if (sy < 0 || sy >= H)
                        continue;
                    const T* src = row + y * W;
                    T* dst = plane + sy * W;
                    for (long x = 0; x < W; ++x) {
                        const long sx = x + dx;
                        if (sx >= 0 && sx < W)
                            dst[sx] += src[x];
                    }
                }
            }
}

}  // namespace

// ---------------------------------------------------------------- conv2d

// Sequential sum. Eigen's vectorized redux peels by buffer address, which
// would make results depend on where the allocator put the tensor.
template <typename E>
double ordered_sum(const E& e)
{
    double s = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i)
        s += static_cast<double>(e.coeff(i));
    return s;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicLayerParams<T>& params)
{
    const ConvGeometry g = conv_geometry(input, params);
    BasicTensor<T> out({g.n, g.c_out, g.h, g.w});
    std::vector<T> col(g.patch() * g.hw());
    ConstMapMat<T> weights(params.weights.ptr(), g.c_out, g.patch());
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(input.ptr() + n * g.c_in * g.hw(), g, col.data());
        MapMat<T> o(out.ptr() + n * g.c_out * g.hw(), g.c_out, g.hw());
        o.noalias() = weights * ConstMapMat<T>(col.data(), g.patch(), g.hw());
        for (std::size_t c = 0; c < g.c_out; ++c)
            o.row(c).array() += params.bias[c];
    }
    return out;
}

template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, BasicLayerParams<T>& params,
                               const BasicTensor<T>& grad_output)
{
    const ConvGeometry g = conv_geometry(input, params);
    if (grad_output.shape() != Shape{g.n, g.c_out, g.h, g.w})
        throw DimensionError("conv2d backward: grad shape " + shape_str(grad_output.shape()) +
                             " does not match output");
    params.weights.require_grad();
    params.bias.require_grad();
    BasicTensor<T> grad_in(input.shape());
    std::vector<T> col(g.patch() * g.hw());
    std::vector<T> dcol(g.patch() * g.hw());
    ConstMapMat<T> weights(params.weights.ptr(), g.c_out, g.patch());
    MapMat<T> dweights(params.weights.grad().data(), g.c_out, g.patch());
    for (std::size_t n = 0; n < g.n; ++n) {
        ConstMapMat<T> dout(grad_output.ptr() + n * g.c_out * g.hw(), g.c_out, g.hw());
        im2col(input.ptr() + n * g.c_in * g.hw(), g, col.data());
        dweights.noalias() += dout * ConstMapMat<T>(col.data(), g.patch(), g.hw()).transpose();
        for (std::size_t c = 0; c < g.c_out; ++c)
            params.bias.grad()[c] += static_cast<T>(ordered_sum(dout.row(c)));
        MapMat<T>(dcol.data(), g.patch(), g.hw()).noalias() = weights.transpose() * dout;
        col2im_add(dcol.data(), g, grad_in.ptr() + n * g.c_in * g.hw());
    }
    return grad_in;
}

// ------------------------------------------------------------- maxpool2d

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, PoolCache* cache)
{
    expect_dim(input.shape(), 4, "maxpool2d");
    const auto& s = input.shape();
    const std::size_t N = s[0], C = s[1], H = s[2], W = s[3];
    if (H < 2 || W < 2)
        throw DimensionError("maxpool2d: input " + shape_str(s) + " smaller than the 2x2 kernel");
    const std::size_t OH = H / 2, OW = W / 2;
    BasicTensor<T> out({N, C, OH, OW});
    if (cache) {
        cache->input_shape = s;
        cache->argmax.resize(out.numel());
    }
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < N * C; ++plane) {
        const std::size_t base = plane * H * W;
        for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox, ++o) {
                // Row-major scan with strict '>' keeps the first maximum.
                std::size_t best = base + 2 * oy * W + 2 * ox;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = base + (2 * oy + dy) * W + 2 * ox + dx;
                        if (input[idx] > input[best])
                            best = idx;
                    }
                out[o] = input[best];
                if (cache)
                    cache->argmax[o] = static_cast<std::uint32_t>(best);
            }
    }
    return out;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_output, const PoolCache& cache)
{
    if (grad_output.numel() != cache.argmax.size())
        throw DimensionError("maxpool2d backward: grad shape " + shape_str(grad_output.shape()) +
                             " does not match cached output");
    BasicTensor<T> grad_in(cache.input_shape);
    for (std::size_t i = 0; i < cache.argmax.size(); ++i)
        grad_in[cache.argmax[i]] += grad_output[i];
    return grad_in;
}

// ------------------------------------------------------------- batchnorm

namespace {

struct ChannelLayout {
    std::size_t n, c, inner;  // inner = H*W, or 1 for [N,C]
};

ChannelLayout channel_layout(const Shape& s)
{
    if (s.size() == 2)
        return {s[0], s[1], 1};
    if (s.size() == 4)
        return {s[0], s[1], s[2] * s[3]};
    throw DimensionError("batchnorm: expected [N,C] or [N,C,H,W], got " + shape_str(s));
}

}  // namespace

// One (example, channel) block of `inner` contiguous values.
template <typename T>
Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> plane(T* data, const ChannelLayout& L, std::size_t n, std::size_t c)
{
    return {data + (n * L.c + c) * L.inner, static_cast<Eigen::Index>(L.inner)};
}
template <typename T>
Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> plane(const T* data, const ChannelLayout& L, std::size_t n,
                                                           std::size_t c)
{
    return {data + (n * L.c + c) * L.inner, static_cast<Eigen::Index>(L.inner)};
}

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, BasicLayerParams<T>& params, Mode mode,
                         const BatchNormOptions& options, BatchNormCache<T>* cache)
{
    const ChannelLayout L = channel_layout(input.shape());
    expect_axis("batchnorm", "C (channels)", params.weights.numel(), L.c);
    expect_axis("batchnorm", "C (bias)", params.bias.numel(), L.c);
    expect_axis("batchnorm", "C (running stats)", params.running_var.numel(), L.c);
    if (mode == Mode::train && L.n < 2)
        throw ContractError("batchnorm: degenerate batch of size " + std::to_string(L.n) +
                            " in train mode (need at least 2)");

    const T eps = static_cast<T>(options.eps);
    const T momentum = static_cast<T>(options.momentum);
    const std::size_t count = L.n * L.inner;
    BasicTensor<T> out(input.shape());
    BasicTensor<T> normalized(input.shape());
    std::vector<T> inv_std(L.c);

    for (std::size_t c = 0; c < L.c; ++c) {
        T mean, var;
        if (mode == Mode::train) {
            double sum = 0;
            for (std::size_t n = 0; n < L.n; ++n)
                sum += ordered_sum(plane(input.ptr(), L, n, c));
            mean = static_cast<T>(sum / static_cast<double>(count));
            double sq = 0;
            for (std::size_t n = 0; n < L.n; ++n)
                sq += ordered_sum((plane(input.ptr(), L, n, c) - mean).square());
            var = static_cast<T>(sq / static_cast<double>(count));
            params.running_mean[c] = (T(1) - momentum) * params.running_mean[c] + momentum * mean;
            params.running_var[c] = std::max((T(1) - momentum) * params.running_var[c] + momentum * var,
                                             std::numeric_limits<T>::min());
        } else {
            mean = params.running_mean[c];
            var = params.running_var[c];
        }
        const T istd = T(1) / std::sqrt(var + eps);
        inv_std[c] = istd;
        const T gamma = params.weights[c], beta = params.bias[c];
        for (std::size_t n = 0; n < L.n; ++n) {
            auto xh = plane(normalized.ptr(), L, n, c);
            xh = (plane(input.ptr(), L, n, c) - mean) * istd;
            plane(out.ptr(), L, n, c) = gamma * xh + beta;
        }
    }
    if (cache) {
        cache->mode = mode;
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

template <typename T>
BasicTensor<T> batchnorm_backward(const BasicTensor<T>& grad_output, BasicLayerParams<T>& params,
                                  const BatchNormCache<T>& cache)
{
    if (grad_output.shape() != cache.normalized.shape())
        throw DimensionError("batchnorm backward: grad shape " + shape_str(grad_output.shape()) +
                             " does not match cached input");
    const ChannelLayout L = channel_layout(grad_output.shape());
    params.weights.require_grad();
    params.bias.require_grad();
    const T count = static_cast<T>(L.n * L.inner);
    BasicTensor<T> grad_in(grad_output.shape());
    for (std::size_t c = 0; c < L.c; ++c) {
        double acc_g = 0, acc_gx = 0;
        for (std::size_t n = 0; n < L.n; ++n) {
            const auto g = plane(grad_output.ptr(), L, n, c);
            acc_g += ordered_sum(g);
            acc_gx += ordered_sum(g * plane(cache.normalized.ptr(), L, n, c));
        }
        const T sum_g = static_cast<T>(acc_g), sum_gx = static_cast<T>(acc_gx);
        params.weights.grad()[c] += sum_gx;
        params.bias.grad()[c] += sum_g;
        const T scale = params.weights[c] * cache.inv_std[c];
        for (std::size_t n = 0; n < L.n; ++n) {
            auto gi = plane(grad_in.ptr(), L, n, c);
            if (cache.mode == Mode::train)
                gi = scale * (plane(grad_output.ptr(), L, n, c) - sum_g / count -
                              plane(cache.normalized.ptr(), L, n, c) * (sum_gx / count));
            else
                gi = scale * plane(grad_output.ptr(), L, n, c);
        }
    }
    return grad_in;
}

// ---------------------------------------------------------------- linear

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicLayerParams<T>& params)
{
    expect_dim(input.shape(), 2, "linear");
    const Shape& ws = params.weights.shape();
    if (ws.size() != 2)
        throw DimensionError("linear: weights must be [F_out,F_in], got " + shape_str(ws));
    expect_axis("linear", "F_in", input.shape()[1], ws[1]);
    expect_axis("linear", "F_out (bias)", params.bias.numel(), ws[0]);
    const std::size_t N = input.shape()[0], in = ws[1], outf = ws[0];
    BasicTensor<T> out({N, outf});
    MapMat<T> o(out.ptr(), N, outf);
    o.noalias() = ConstMapMat<T>(input.ptr(), N, in) * ConstMapMat<T>(params.weights.ptr(), outf, in).transpose();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t j = 0; j < outf; ++j)
            o(n, j) += params.bias[j];
    return out;
}

template <typename T>
BasicTensor<T> linear_backward(const BasicTensor<T>& input, BasicLayerParams<T>& params,
                               const BasicTensor<T>& grad_output)
{
    const std::size_t N = input.shape()[0], in = params.weights.shape()[1], outf = params.weights.shape()[0];
    if (grad_output.shape() != Shape{N, outf})
        throw DimensionError("linear backward: grad shape " + shape_str(grad_output.shape()) +
                             " does not match output");
    params.weights.require_grad();
    params.bias.require_grad();
    ConstMapMat<T> g(grad_output.ptr(), N, outf);
    ConstMapMat<T> x(input.ptr(), N, in);
    MapMat<T>(params.weights.grad().data(), outf, in).noalias() += g.transpose() * x;
    for (std::size_t j = 0; j < outf; ++j)
        params.bias.grad()[j] += static_cast<T>(ordered_sum(g.col(j)));
    BasicTensor<T> grad_in({N, in});
    MapMat<T>(grad_in.ptr(), N, in).noalias() = g * ConstMapMat<T>(params.weights.ptr(), outf, in);
    return grad_in;
}

// ------------------------------------------------------------ elementwise

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input)
{
    BasicTensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.numel(); ++i)
        out[i] = input[i] > T(0) ? input[i] : T(0);
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output)
{
    if (input.numel() != grad_output.numel())
        throw DimensionError("relu backward: shape mismatch");
    BasicTensor<T> grad_in(input.shape());
    for (std::size_t i = 0; i < input.numel(); ++i)
        grad_in[i] = input[i] > T(0) ? grad_output[i] : T(0);
    return grad_in;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input)
{
    const T lo = static_cast<T>(kSigmoidClamp), hi = T(1) - static_cast<T>(kSigmoidClamp);
    BasicTensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.numel(); ++i) {
        const T x = input[i];
        const T s = x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
        out[i] = std::clamp(s, lo, hi);
    }
    return out;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output)
{
    if (output.numel() != grad_output.numel())
        throw DimensionError("sigmoid backward: shape mismatch");
    const T lo = static_cast<T>(kSigmoidClamp), hi = T(1) - static_cast<T>(kSigmoidClamp);
    BasicTensor<T> grad_in(output.shape());
    for (std::size_t i = 0; i < output.numel(); ++i) {
        const T s = output[i];
        grad_in[i] = (s <= lo || s >= hi) ? T(0) : grad_output[i] * s * (T(1) - s);
    }
    return grad_in;
}

template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& input)
{
    if (input.dim() < 2)
        throw DimensionError("flatten: expected at least 2-d input, got " + shape_str(input.shape()));
    return input.reshaped({input.shape()[0], input.numel() / input.shape()[0]});
}

template <typename T>
BasicTensor<T> unflatten(const BasicTensor<T>& input, const Shape& shape)
{
    return input.reshaped(shape);
}

#define MPDA_INSTANTIATE_OPS(T)                                                                              \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicLayerParams<T>&);                        \
    template BasicTensor<T> conv2d_backward(const BasicTensor<T>&, BasicLayerParams<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> maxpool2d(const BasicTensor<T>&, PoolCache*);                                    \
    template BasicTensor<T> maxpool2d_backward(const BasicTensor<T>&, const PoolCache&);                     \
    template BasicTensor<T> batchnorm(const BasicTensor<T>&, BasicLayerParams<T>&, Mode, const BatchNormOptions&, \
                                      BatchNormCache<T>*);                                                   \
    template BasicTensor<T> batchnorm_backward(const BasicTensor<T>&, BasicLayerParams<T>&,                   \
                                               const BatchNormCache<T>&);                                    \
    template BasicTensor<T> linear(const BasicTensor<T>&, const BasicLayerParams<T>&);                        \
    template BasicTensor<T> linear_backward(const BasicTensor<T>&, BasicLayerParams<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                     \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                     \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                  \
    template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&, const BasicTensor<T>&);                  \
    template BasicTensor<T> flatten(const BasicTensor<T>&);                                                  \
    template BasicTensor<T> unflatten(const BasicTensor<T>&, const Shape&);

MPDA_INSTANTIATE_OPS(float)
MPDA_INSTANTIATE_OPS(double)

}  // namespace mpda
