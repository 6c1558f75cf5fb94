#include "ddim/unet.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ddim {

UNetConfig UNetConfig::desk() {
    UNetConfig c;
    c.image_height = 24;
    c.image_width = 96;
    c.widths = {16, 32, 48};
    c.bottleneck_width = 64;
    return c;
}

void UNetConfig::validate() const {
    if (widths.empty()) throw std::invalid_argument("unet: at least one resolution level is required");
    for (auto w : widths) {
        if (w == 0) throw std::invalid_argument("unet: channel widths must be positive");
    }
    if (bottleneck_width == 0) throw std::invalid_argument("unet: bottleneck width must be positive");
    if (block_depth < 1) throw std::invalid_argument("unet: block_depth must be >= 1");
    if (embedding_size < 2 || embedding_size % 2) throw std::invalid_argument("unet: embedding size must be even");
    if (!(min_frequency > 0.0 && max_frequency >= min_frequency)) {
        throw std::invalid_argument("unet: embedding frequency range must satisfy 0 < min <= max");
    }
    const std::size_t factor = std::size_t{1} << levels();
    if (image_height == 0 || image_width == 0 || image_height % factor || image_width % factor) {
        throw std::invalid_argument("unet: image size " + std::to_string(image_height) + "x" +
                                    std::to_string(image_width) + " must be divisible by " + std::to_string(factor));
    }
}

template <typename T>
Tensor<T> sinusoidal_embedding(double variance, const UNetConfig& config) {
    if (!(variance > 0.0)) {
        throw std::invalid_argument("sinusoidal_embedding: variance must be positive, got " + std::to_string(variance));
    }
    const std::size_t half = config.embedding_size / 2;
    const double log_lo = std::log(config.min_frequency);
    const double log_hi = std::log(config.max_frequency);
    Tensor<T> out(Shape{config.embedding_size});
    for (std::size_t k = 0; k < half; ++k) {
        const double frac = half > 1 ? static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
        const double freq = std::exp(log_lo + frac * (log_hi - log_lo));
        const double angle = 2.0 * std::numbers::pi * freq * variance;
        out[k] = static_cast<T>(std::sin(angle));
        out[half + k] = static_cast<T>(std::cos(angle));
    }
    return out;
}

template <typename T>
UNet<T>::UNet(UNetConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto& w = config_.widths;
    add_param("stem.kernel", {1, 1, 1, w[0]});
    add_param("stem.bias", {w[0]});
    std::size_t channels = w[0] + config_.embedding_size;
    std::vector<std::size_t> skip_widths;
    for (std::size_t l = 0; l < config_.levels(); ++l) {
        for (std::size_t b = 0; b < config_.block_depth; ++b) {
            add_residual_block("down" + std::to_string(l) + ".block" + std::to_string(b), channels, w[l]);
            channels = w[l];
            skip_widths.push_back(channels);
        }
    }
    for (std::size_t b = 0; b < config_.block_depth; ++b) {
        add_residual_block("mid.block" + std::to_string(b), channels, config_.bottleneck_width);
        channels = config_.bottleneck_width;
    }
    for (std::size_t l = config_.levels(); l-- > 0;) {
        for (std::size_t b = 0; b < config_.block_depth; ++b) {
            const std::size_t skip = skip_widths.back();
            skip_widths.pop_back();
            add_residual_block("up" + std::to_string(l) + ".block" + std::to_string(b), channels + skip, w[l]);
            channels = w[l];
        }
    }
    add_param("head.kernel", {1, 1, channels, 1});
    add_param("head.bias", {1});
}

template <typename T>
void UNet<T>::add_param(const std::string& name, Shape shape, T fill) {
    params_.emplace(name, Tensor<T>(std::move(shape), fill));
}

template <typename T>
void UNet<T>::add_residual_block(const std::string& prefix, std::size_t in_width, std::size_t out_width) {
    if (in_width != out_width) {
        add_param(prefix + ".skip.kernel", {1, 1, in_width, out_width});
        add_param(prefix + ".skip.bias", {out_width});
    }
    add_param(prefix + ".norm.scale", {in_width}, T(1));
    buffers_.emplace(prefix + ".norm.running_mean", Tensor<T>(Shape{in_width}, T(0)));
    buffers_.emplace(prefix + ".norm.running_var", Tensor<T>(Shape{in_width}, T(1)));
    add_param(prefix + ".conv1.kernel", {3, 3, in_width, out_width});
    add_param(prefix + ".conv1.bias", {out_width});
    add_param(prefix + ".conv2.kernel", {3, 3, out_width, out_width});
    add_param(prefix + ".conv2.bias", {out_width});
}

template <typename T>
void UNet<T>::initialize(Rng& rng) {
    // Map order makes the draw sequence a pure function of the config.
    for (auto& [name, tensor] : params_) {
        const bool is_kernel = name.ends_with(".kernel");
        if (!is_kernel || name == "head.kernel") continue;
        const auto& s = tensor.shape();
        const double fan_in = static_cast<double>(s[0] * s[1] * s[2]);
        const double bound = 1.0 / std::sqrt(fan_in);
        for (auto& v : tensor.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
}

template <typename T>
std::size_t UNet<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
}

template <typename T>
ad::Var<T> residual_block(const ad::Var<T>& x, std::size_t width, const std::string& prefix,
                          const std::map<std::string, ad::Var<T>>& params,
                          const std::map<std::string, Tensor<T>>& buffers, NormMode mode,
                          std::vector<NormStatistics<T>>* stats) {
    auto p = [&](const std::string& suffix) -> const ad::Var<T>& {
        auto it = params.find(prefix + suffix);
        if (it == params.end()) throw std::out_of_range("missing parameter " + prefix + suffix);
        return it->second;
    };
    const std::size_t in_width = x.shape().back();
    ad::Var<T> residual = in_width == width ? x : ad::conv2d(x, p(".skip.kernel"), p(".skip.bias"));
    ad::Var<T> h;
    const T eps = static_cast<T>(kNormEpsilon);
    if (mode == NormMode::batch_statistics) {
        NormStatistics<T> s{prefix + ".norm", {}, {}};
        h = ad::batch_norm_train(x, p(".norm.scale"), eps, &s.mean, &s.var);
        if (stats) stats->push_back(std::move(s));
    } else {
        h = ad::batch_norm_infer(x, p(".norm.scale"), buffers.at(prefix + ".norm.running_mean"),
                                 buffers.at(prefix + ".norm.running_var"), eps);
    }
    h = ad::swish(ad::conv2d(h, p(".conv1.kernel"), p(".conv1.bias")));
    h = ad::conv2d(h, p(".conv2.kernel"), p(".conv2.bias"));
    return ad::add(h, residual);
}

template <typename T>
ForwardResult<T> UNet<T>::forward(ad::Tape<T>& tape, const Tensor<T>& noisy, std::span<const double> variances,
                                  NormMode mode) const {
    const auto d = image_dims(noisy.shape(), "unet");
    if (noisy.rank() == 3 && tape.recording()) {
        throw std::invalid_argument("unet: a recording forward requires a batched [N,H,W,1] input");
    }
    if (d.height != config_.image_height || d.width != config_.image_width || d.channels != 1) {
        throw ShapeError("unet: expected images of " + std::to_string(config_.image_height) + "x" +
                         std::to_string(config_.image_width) + "x1, got " + shape_str(noisy.shape()));
    }
    if (variances.size() != d.batch) {
        throw ShapeError("unet: " + std::to_string(variances.size()) + " variances for a batch of " +
                         std::to_string(d.batch));
    }
    const std::size_t hw = d.height * d.width, e = config_.embedding_size;
    Tensor<T> emb(Shape{d.batch, d.height, d.width, e});
    for (std::size_t n = 0; n < d.batch; ++n) {
        if (!(variances[n] > 0.0 && variances[n] <= 1.0)) {
            throw std::invalid_argument("unet: noise variance must lie in (0,1], got " + std::to_string(variances[n]));
        }
        const auto v = sinusoidal_embedding<T>(variances[n], config_);
        for (std::size_t p = 0; p < hw; ++p) {
            std::copy(v.data(), v.data() + e, emb.data() + (n * hw + p) * e);
        }
    }

    ForwardResult<T> r;
    for (const auto& [name, t] : params_) r.params.emplace(name, tape.parameter(t));
    auto P = [&](const std::string& name) -> const ad::Var<T>& { return r.params.at(name); };
    auto* stats = mode == NormMode::batch_statistics ? &r.norm_statistics : nullptr;

    auto x = tape.constant(noisy.reshaped({d.batch, d.height, d.width, 1}));
    auto h = ad::conv2d(x, P("stem.kernel"), P("stem.bias"));
    h = ad::concat_channels(h, tape.constant(std::move(emb)));

    std::vector<ad::Var<T>> skips;
    for (std::size_t l = 0; l < config_.levels(); ++l) {
        for (std::size_t b = 0; b < config_.block_depth; ++b) {
            h = residual_block(h, config_.widths[l], "down" + std::to_string(l) + ".block" + std::to_string(b),
                               r.params, buffers_, mode, stats);
            skips.push_back(h);
            ++r.skips_pushed;
        }
        h = ad::avgpool2(h);
    }
    for (std::size_t b = 0; b < config_.block_depth; ++b) {
        h = residual_block(h, config_.bottleneck_width, "mid.block" + std::to_string(b), r.params, buffers_,
                           mode, stats);
    }
    for (std::size_t l = config_.levels(); l-- > 0;) {
        h = ad::upsample_bilinear2(h);
        for (std::size_t b = 0; b < config_.block_depth; ++b) {
            h = ad::concat_channels(h, skips.back());
            skips.pop_back();
            ++r.skips_popped;
            h = residual_block(h, config_.widths[l], "up" + std::to_string(l) + ".block" + std::to_string(b),
                               r.params, buffers_, mode, stats);
        }
    }
    if (!skips.empty()) throw std::logic_error("unet: unbalanced skip connections");
    h = ad::conv2d(h, P("head.kernel"), P("head.bias"));
    r.eps_pred = noisy.rank() == 3 ? tape.constant(h.value().reshaped(noisy.shape())) : h;
    return r;
}

template <typename T>
Tensor<T> UNet<T>::predict(const Tensor<T>& noisy, std::span<const double> variances) const {
    ad::Tape<T> tape(false);
    return forward(tape, noisy, variances, NormMode::running_statistics).eps_pred.value();
}

template <typename T>
void UNet<T>::update_running_statistics(const std::vector<NormStatistics<T>>& stats, double momentum) {
    const T m = static_cast<T>(momentum), rest = static_cast<T>(1.0 - momentum);
    for (const auto& s : stats) {
        auto& mean = buffers_.at(s.layer + ".running_mean");
        auto& var = buffers_.at(s.layer + ".running_var");
        for (std::size_t c = 0; c < mean.size(); ++c) {
            mean[c] = m * mean[c] + rest * s.mean[c];
            var[c] = m * var[c] + rest * s.var[c];
        }
    }
}

template <typename T>
Components<T> predict_components(const NoisePredictor<T>& predictor, const Tensor<T>& x_t,
                                 std::span<const double> times, const DiffusionSchedule& schedule) {
    const auto d = image_dims(x_t.shape(), "predict_components");
    if (times.size() != d.batch) {
        throw ShapeError("predict_components: " + std::to_string(times.size()) + " times for a batch of " +
                         std::to_string(d.batch));
    }
    std::vector<Rates> rates(d.batch);
    std::vector<double> variances(d.batch);
    for (std::size_t n = 0; n < d.batch; ++n) {
        rates[n] = schedule.rates(times[n]);
        if (rates[n].signal < 1e-8) {
            throw std::domain_error("predict_components: signal rate " + std::to_string(rates[n].signal) +
                                    " too small to recover x0");
        }
        variances[n] = rates[n].noise * rates[n].noise;
    }
    Components<T> c{predictor(x_t, variances), Tensor<T>(x_t.shape())};
    if (c.eps_pred.shape() != x_t.shape()) {
        throw ShapeError("predict_components: predictor returned " + shape_str(c.eps_pred.shape()) + " for input " +
                         shape_str(x_t.shape()));
    }
    const std::size_t per = x_t.size() / d.batch;
    for (std::size_t n = 0; n < d.batch; ++n) {
        const T s = static_cast<T>(rates[n].signal), z = static_cast<T>(rates[n].noise);
        for (std::size_t i = n * per; i < (n + 1) * per; ++i) c.x0_pred[i] = (x_t[i] - z * c.eps_pred[i]) / s;
    }
    return c;
}

template class UNet<float>;
template class UNet<double>;
template Tensor<float> sinusoidal_embedding(double, const UNetConfig&);
template Tensor<double> sinusoidal_embedding(double, const UNetConfig&);
template ad::Var<float> residual_block(const ad::Var<float>&, std::size_t, const std::string&,
                                       const std::map<std::string, ad::Var<float>>&,
                                       const std::map<std::string, Tensor<float>>&, NormMode,
                                       std::vector<NormStatistics<float>>*);
template ad::Var<double> residual_block(const ad::Var<double>&, std::size_t, const std::string&,
                                        const std::map<std::string, ad::Var<double>>&,
                                        const std::map<std::string, Tensor<double>>&, NormMode,
                                        std::vector<NormStatistics<double>>*);
template Components<float> predict_components(const NoisePredictor<float>&, const Tensor<float>&,
                                              std::span<const double>, const DiffusionSchedule&);
template Components<double> predict_components(const NoisePredictor<double>&, const Tensor<double>&,
                                               std::span<const double>, const DiffusionSchedule&);

}  // namespace ddim
