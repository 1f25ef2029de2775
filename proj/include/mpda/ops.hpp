#pragma once

#include <cstdint>
#include <vector>

#include "mpda/tensor.hpp"

namespace mpda {

enum class Mode { train, eval };

// Layer primitives. Each forward is a pure function of its inputs (batchnorm
// in train mode additionally updates the running statistics it is handed);
// each backward accumulates parameter gradients into params.*.grad() and
// returns the gradient with respect to the input.

// --- conv2d: stride 1, zero padding (kernel-1)/2, weights [C_out, C_in, k, k]

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicLayerParams<T>& params);

template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, BasicLayerParams<T>& params,
                               const BasicTensor<T>& grad_output);

// --- maxpool2d: kernel 2, stride 2, trailing odd row/column dropped

struct PoolCache {
    Shape input_shape;
    /// Flat input index of the winning element for every output element.
    std::vector<std::uint32_t> argmax;
};

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, PoolCache* cache = nullptr);

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_output, const PoolCache& cache);

// --- batchnorm over [N,C] or [N,C,H,W], statistics per channel

struct BatchNormOptions {
    double eps = 1e-5;
    double momentum = 0.1;
};

template <typename T>
struct BatchNormCache {
    Mode mode = Mode::train;
    BasicTensor<T> normalized;     // x-hat, input shape
    std::vector<T> inv_std;        // per channel
};

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, BasicLayerParams<T>& params, Mode mode,
                         const BatchNormOptions& options = {}, BatchNormCache<T>* cache = nullptr);

template <typename T>
BasicTensor<T> batchnorm_backward(const BasicTensor<T>& grad_output, BasicLayerParams<T>& params,
                                  const BatchNormCache<T>& cache);

// --- linear: [N,F_in] x [F_out,F_in]^T + b

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicLayerParams<T>& params);

template <typename T>
BasicTensor<T> linear_backward(const BasicTensor<T>& input, BasicLayerParams<T>& params,
                               const BasicTensor<T>& grad_output);

// --- elementwise and reshapes

inline constexpr double kSigmoidClamp = 1e-7;

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

/// Output clamped to [1e-7, 1-1e-7]; the clamp has zero gradient.
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output);

template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> unflatten(const BasicTensor<T>& input, const Shape& shape);

}  // namespace mpda
