#pragma once

// Forward noising. Noise tensors are always supplied by the caller.

#include "ddim/schedule.hpp"
#include "ddim/tensor.hpp"

namespace ddim {

template <typename T>
struct NoisyPair {
    Tensor<T> x_t;
    Tensor<T> eps;
    double t;
    double signal_rate;
    double noise_rate;
};

// x_t = signal_rate(t) * x0 + noise_rate(t) * eps, in one shot from x0.
template <typename T>
NoisyPair<T> noisify(const Tensor<T>& x0, const Tensor<T>& eps, double t, const DiffusionSchedule& schedule);

// One application of q: sqrt(1 - beta) * x_prev + sqrt(beta) * eps, beta in (0,1).
template <typename T>
Tensor<T> single_step(const Tensor<T>& x_prev, const Tensor<T>& eps, double beta);

// Noised point at t_target that reuses eps_shared for all but sigma^2 of the
// noise variance:
//   signal * x0 + sqrt(noise^2 - sigma^2) * eps_shared + sigma * eps_fresh.
// With sigma = 0 it lies on the same noising path as any other point built
// from eps_shared. Requires 0 <= sigma <= noise_rate(t_target).
template <typename T>
Tensor<T> collinear_point(const Tensor<T>& x0, const Tensor<T>& eps_shared, const Tensor<T>& eps_fresh,
                          double t_target, double sigma, const DiffusionSchedule& schedule);

}  // namespace ddim
