#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ddim/autodiff.hpp"
#include "ddim/rng.hpp"
#include "ddim/schedule.hpp"
#include "ddim/tensor.hpp"

namespace ddim {

struct UNetConfig {
    std::size_t image_height = 48;
    std::size_t image_width = 192;
    std::vector<std::size_t> widths{32, 64, 96};
    std::size_t bottleneck_width = 128;
    std::size_t block_depth = 2;
    std::size_t embedding_size = 32;  // sine lanes followed by cosine lanes
    double min_frequency = 1.0;
    double max_frequency = 1000.0;

    // 24x96 images with widths [16,32,48] and a 64-wide bottleneck.
    static UNetConfig desk();

    std::size_t levels() const { return widths.size(); }
    // Throws std::invalid_argument describing the first violated constraint.
    void validate() const;

    bool operator==(const UNetConfig&) const = default;
};

inline constexpr double kNormEpsilon = 1e-3;
inline constexpr double kNormMomentum = 0.99;

// Maps a noise variance in (0,1] to embedding_size lanes:
// sin(2 pi f_k v) for k < E/2, then cos(2 pi f_k v), f_k geometric in
// [min_frequency, max_frequency].
template <typename T>
Tensor<T> sinusoidal_embedding(double variance, const UNetConfig& config);

enum class NormMode { batch_statistics, running_statistics };

// Per-normalization-layer batch statistics observed during a training forward.
template <typename T>
struct NormStatistics {
    std::string layer;
    Tensor<T> mean, var;
};

template <typename T>
struct ForwardResult {
    ad::Var<T> eps_pred;
    std::map<std::string, ad::Var<T>> params;
    std::vector<NormStatistics<T>> norm_statistics;
    std::size_t skips_pushed = 0;
    std::size_t skips_popped = 0;
};

// Noise predictor: maps (noisy images, noise variance per image) to a
// predicted noise field of the same shape.
template <typename T>
class UNet {
public:
    // Parameters start at their deterministic defaults (zero kernels, unit
    // norm scales); call initialize() to draw the random conv weights.
    explicit UNet(UNetConfig config);

    void initialize(Rng& rng);

    const UNetConfig& config() const { return config_; }

    // Trainable tensors keyed by name; iteration order is lexicographic.
    std::map<std::string, Tensor<T>>& parameters() { return params_; }
    const std::map<std::string, Tensor<T>>& parameters() const { return params_; }
    // Running normalization statistics (not trained by the optimizer).
    std::map<std::string, Tensor<T>>& buffers() { return buffers_; }
    const std::map<std::string, Tensor<T>>& buffers() const { return buffers_; }

    std::size_t parameter_count() const;

    // Records the full network on `tape`. noisy is [N,H,W,1] (or [H,W,1]);
    // variances holds one value per batch item.
    ForwardResult<T> forward(ad::Tape<T>& tape, const Tensor<T>& noisy, std::span<const double> variances,
                             NormMode mode) const;

    // Inference with running statistics, no gradient bookkeeping.
    Tensor<T> predict(const Tensor<T>& noisy, std::span<const double> variances) const;

    // running = momentum * running + (1 - momentum) * batch
    void update_running_statistics(const std::vector<NormStatistics<T>>& stats, double momentum = kNormMomentum);

    // Copies every tensor, converting precision.
    template <typename U>
    UNet<U> converted() const {
        UNet<U> out(config_);
        for (const auto& [name, t] : params_) out.parameters().at(name) = t.template cast<U>();
        for (const auto& [name, t] : buffers_) out.buffers().at(name) = t.template cast<U>();
        return out;
    }

private:
    void add_param(const std::string& name, Shape shape, T fill = T(0));
    void add_residual_block(const std::string& prefix, std::size_t in_width, std::size_t out_width);

    UNetConfig config_;
    std::map<std::string, Tensor<T>> params_;
    std::map<std::string, Tensor<T>> buffers_;
};

// Residual block on its own, for testing the block contract:
// r = (Cin == Cout ? x : conv1x1(x)); y = conv3x3(swish(conv3x3(norm(x)))) + r.
// `params` must hold <prefix>.{norm.scale,conv1.*,conv2.*[,skip.*]}.
template <typename T>
ad::Var<T> residual_block(const ad::Var<T>& x, std::size_t width, const std::string& prefix,
                          const std::map<std::string, ad::Var<T>>& params,
                          const std::map<std::string, Tensor<T>>& buffers, NormMode mode,
                          std::vector<NormStatistics<T>>* stats);

template <typename T>
using NoisePredictor = std::function<Tensor<T>(const Tensor<T>& x_t, std::span<const double> variances)>;

template <typename T>
NoisePredictor<T> as_predictor(const UNet<T>& model) {
    return [&model](const Tensor<T>& x, std::span<const double> v) { return model.predict(x, v); };
}

template <typename T>
struct Components {
    Tensor<T> eps_pred;
    Tensor<T> x0_pred;
};

// eps_pred = predictor(x_t, noise_rate^2); x0_pred = (x_t - noise_rate * eps_pred) / signal_rate.
// `times` holds one diffusion time per batch item (a single time for rank-3 input).
template <typename T>
Components<T> predict_components(const NoisePredictor<T>& predictor, const Tensor<T>& x_t,
                                 std::span<const double> times, const DiffusionSchedule& schedule);

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace ddim
