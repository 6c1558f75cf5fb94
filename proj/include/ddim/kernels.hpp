#pragma once

// Forward and gradient kernels for the operators the denoiser needs.
// All image operands are NHWC (rank 4) or HWC (rank 3, batch of one).
// Every kernel is deterministic: parallel work is split per image or per
// output cell and any cross-image reduction is summed in image order, so the
// bytes produced do not depend on the thread count.

#include "ddim/tensor.hpp"

namespace ddim::kernels {

// kernel is [k,k,Cin,Cout] with k in {1,3}; stride 1, zero "same" padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias);

template <typename T>
struct Conv2dGrads {
    Tensor<T> input, kernel, bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& grad_out,
                               bool need_input_grad = true);

// Mean of each disjoint 2x2 block. H and W must be even.
template <typename T>
Tensor<T> avgpool2(const Tensor<T>& input);
template <typename T>
Tensor<T> avgpool2_backward(const Tensor<T>& grad_out, const Shape& input_shape);

// 2x bilinear upsampling, half-pixel centers, clamped borders.
template <typename T>
Tensor<T> upsample_bilinear2(const Tensor<T>& input);
template <typename T>
Tensor<T> upsample_bilinear2_backward(const Tensor<T>& grad_out, const Shape& input_shape);

// Channels of a precede channels of b. A default-constructed (shapeless)
// operand acts as a zero-channel tensor.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& grad, std::size_t channels_a);

template <typename T>
Tensor<T> swish(const Tensor<T>& x);
template <typename T>
Tensor<T> swish_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// input [..., N] x weight [N, M] + bias [M] -> [..., M]
template <typename T>
Tensor<T> affine(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct AffineGrads {
    Tensor<T> input, weight, bias;
};

template <typename T>
AffineGrads<T> affine_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out);

// Mean over all elements of |pred - target|.
template <typename T>
T mean_abs(const Tensor<T>& pred, const Tensor<T>& target);
// d/dpred scaled by upstream; the subgradient at zero difference is 0.
template <typename T>
Tensor<T> mean_abs_backward(const Tensor<T>& pred, const Tensor<T>& target, T grad_out);

// Per-channel normalization over batch and spatial axes, learned scale, no shift.
template <typename T>
struct BatchNormResult {
    Tensor<T> output;
    Tensor<T> mean;     // [C]
    Tensor<T> var;      // [C], biased
    Tensor<T> inv_std;  // [C]
};

template <typename T>
BatchNormResult<T> batch_norm_train(const Tensor<T>& x, const Tensor<T>& scale, T epsilon);

template <typename T>
Tensor<T> batch_norm_infer(const Tensor<T>& x, const Tensor<T>& mean, const Tensor<T>& var,
                           const Tensor<T>& scale, T epsilon);

template <typename T>
struct BatchNormGrads {
    Tensor<T> input, scale;
};

template <typename T>
BatchNormGrads<T> batch_norm_backward(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& mean,
                                      const Tensor<T>& inv_std, const Tensor<T>& grad_out);

}  // namespace ddim::kernels
