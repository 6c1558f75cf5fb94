#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ddim/rng.hpp"
#include "ddim/schedule.hpp"
#include "ddim/tensor.hpp"
#include "ddim/unet.hpp"

namespace ddim {

// Corpus-wide pixel statistics of [0,1]-scaled images.
struct NormStats {
    double mean = 0.0;
    double std = 1.0;

    double normalize(double p) const { return (p - mean) / std; }
    double denormalize(double z) const { return z * std + mean; }

    bool operator==(const NormStats&) const = default;
};

// Population mean and standard deviation over every pixel. Throws on an
// empty or constant corpus.
NormStats compute_norm_stats(std::span<const Tensor<float>> corpus);

std::vector<Tensor<float>> normalize_corpus(std::span<const Tensor<float>> corpus, const NormStats& stats);

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 1;
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    std::uint64_t seed = 0;

    void validate() const;
};

// Adaptive moment estimation with decoupled weight decay:
//   p <- p - lr * wd * p
//   p <- p - lr * m_hat / (sqrt(v_hat) + epsilon)
class AdamW {
public:
    explicit AdamW(const TrainConfig& config);

    void step(std::map<std::string, Tensor<float>>& params, const std::map<std::string, Tensor<float>>& grads);
    std::uint64_t steps() const { return step_; }

private:
    double lr_, wd_, beta1_, beta2_, epsilon_;
    std::uint64_t step_ = 0;
    std::map<std::string, Tensor<float>> m_, v_;
};

// Thrown when a step produces a non-finite loss.
class NonFiniteLoss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Owns the optimizer state and the training random stream for one model.
class Trainer {
public:
    Trainer(UNet<float>& model, TrainConfig config, DiffusionSchedule schedule = {});

    // One update on a standardized batch [B,H,W,1]: draws t ~ U[0,1] per image
    // and eps ~ N(0,1) per pixel, minimizes mean |eps_pred - eps|.
    double train_step(const Tensor<float>& x0_batch);

    // Same update with caller-supplied diffusion times and noise.
    double train_step(const Tensor<float>& x0_batch, std::span<const double> times, const Tensor<float>& eps);

    // Shuffles each epoch, runs every batch (the last may be short), and
    // reports the mean step loss of each epoch through on_epoch.
    std::vector<double> fit(std::span<const Tensor<float>> corpus,
                            const std::function<void(std::size_t epoch, double loss)>& on_epoch = {});

    Rng& rng() { return rng_; }
    const TrainConfig& config() const { return config_; }

private:
    UNet<float>& model_;
    TrainConfig config_;
    DiffusionSchedule schedule_;
    AdamW optimizer_;
    Rng rng_;
};

// Stacks [H,W,1] images (by index) into one [B,H,W,1] batch.
Tensor<float> stack_batch(std::span<const Tensor<float>> images, std::span<const std::size_t> indices);

std::string format_loss_line(std::size_t epoch, double loss);

}  // namespace ddim
