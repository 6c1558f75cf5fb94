#pragma once

// Deterministic reverse diffusion: the reverse-step noise is fixed at zero, so
// a latent maps to exactly one image.

#include <cstdint>
#include <utility>
#include <vector>

#include "ddim/pgm.hpp"
#include "ddim/schedule.hpp"
#include "ddim/trainer.hpp"
#include "ddim/unet.hpp"

namespace ddim {

struct SamplerConfig {
    std::size_t steps = 20;
    DiffusionSchedule schedule;
    NormStats norm;
};

// (t, t_prev) pairs of the uniform grid t_k = 1 - k/steps, k = 0..steps.
std::vector<std::pair<double, double>> time_grid(std::size_t steps);

template <typename T>
struct ReverseStep {
    Tensor<T> x_prev;
    Tensor<T> x0_pred;
};

// x_{t_prev} = signal(t_prev) * x0_pred + noise(t_prev) * eps_pred, with both
// predictions taken at t. Requires 0 <= t_prev < t <= 1.
template <typename T>
ReverseStep<T> reverse_step(const NoisePredictor<T>& denoiser, const Tensor<T>& x_t, double t, double t_prev,
                            const DiffusionSchedule& schedule);

// Treats the latent as the state at t = 1, walks the grid down to 0 and
// returns the last x0 prediction (standardized units).
template <typename T>
Tensor<T> sample(const Tensor<T>& latent, const NoisePredictor<T>& denoiser, std::size_t steps,
                 const DiffusionSchedule& schedule);

// Denormalize, clip to [0,1], quantize with round(p * 255).
GrayImage to_pixels(const Tensor<float>& standardized, const NormStats& norm);

// Draws `count` latents from the "sampling" stream of `seed`, then samples
// each independently. No random draws happen after the latents.
std::vector<GrayImage> generate(std::size_t count, std::uint64_t seed, const UNet<float>& model,
                                const SamplerConfig& config);
// Same, drawing the latents from `rng`; exactly count * H * W draws are made.
std::vector<GrayImage> generate(std::size_t count, Rng& rng, const UNet<float>& model, const SamplerConfig& config);

// Denoiser that knows the clean images x0 (same shape as its input):
// eps = (x_t - sqrt(1 - v) * x0) / sqrt(v) for each item's variance v.
template <typename T>
NoisePredictor<T> oracle_predictor(Tensor<T> x0);

struct OracleReport {
    double max_error = 0.0;  // max |recovered - x0| over all trials and pixels
    std::size_t trials = 0;
    std::size_t steps = 0;
};

// Noises random standard-normal images to t = 1 and samples them back with
// the oracle denoiser, in 32-bit arithmetic.
OracleReport reconstruct_oracle(std::size_t trials, std::size_t steps, std::uint64_t seed,
                                std::size_t height = 48, std::size_t width = 192);

// Tiles images into a grid with 4-pixel white gutters between tiles.
GrayImage contact_sheet(const std::vector<GrayImage>& tiles, std::size_t columns = 0, std::size_t gutter = 4);

}  // namespace ddim
