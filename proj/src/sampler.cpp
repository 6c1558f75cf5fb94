#include "ddim/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ddim/diffusion.hpp"

namespace ddim {

std::vector<std::pair<double, double>> time_grid(std::size_t steps) {
    if (steps < 1) throw std::invalid_argument("sampler: steps must be >= 1");
    std::vector<std::pair<double, double>> grid;
    grid.reserve(steps);
    const double n = static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        grid.emplace_back(1.0 - static_cast<double>(k) / n, 1.0 - static_cast<double>(k + 1) / n);
    }
    return grid;
}

template <typename T>
ReverseStep<T> reverse_step(const NoisePredictor<T>& denoiser, const Tensor<T>& x_t, double t, double t_prev,
                            const DiffusionSchedule& schedule) {
    if (!(t_prev < t)) {
        throw std::invalid_argument("reverse_step: t_prev (" + std::to_string(t_prev) + ") must be below t (" +
                                    std::to_string(t) + ")");
    }
    const auto d = image_dims(x_t.shape(), "reverse_step");
    const std::vector<double> times(d.batch, t);
    auto c = predict_components(denoiser, x_t, times, schedule);
    const Rates r = schedule.rates(t_prev);
    const T s = static_cast<T>(r.signal), z = static_cast<T>(r.noise);
    ReverseStep<T> out{Tensor<T>(x_t.shape()), std::move(c.x0_pred)};
    for (std::size_t i = 0; i < x_t.size(); ++i) out.x_prev[i] = s * out.x0_pred[i] + z * c.eps_pred[i];
    return out;
}

template <typename T>
Tensor<T> sample(const Tensor<T>& latent, const NoisePredictor<T>& denoiser, std::size_t steps,
                 const DiffusionSchedule& schedule) {
    Tensor<T> x = latent;
    Tensor<T> x0;
    for (const auto& [t, t_prev] : time_grid(steps)) {
        auto step = reverse_step(denoiser, x, t, t_prev, schedule);
        x = std::move(step.x_prev);
        x0 = std::move(step.x0_pred);
    }
    return x0;
}

GrayImage to_pixels(const Tensor<float>& standardized, const NormStats& norm) {
    const auto d = image_dims(standardized.shape(), "to_pixels");
    if (d.batch != 1 || d.channels != 1) throw ShapeError("to_pixels: expected one single-channel image");
    GrayImage img(d.width, d.height);
    for (std::size_t i = 0; i < standardized.size(); ++i) {
        const double p = std::clamp(norm.denormalize(standardized[i]), 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(p * 255.0));
    }
    return img;
}

std::vector<GrayImage> generate(std::size_t count, std::uint64_t seed, const UNet<float>& model,
                                const SamplerConfig& config) {
    Rng rng(seed, "sampling");
    return generate(count, rng, model, config);
}

std::vector<GrayImage> generate(std::size_t count, Rng& rng, const UNet<float>& model, const SamplerConfig& config) {
    if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
    const auto& mc = model.config();
    std::vector<Tensor<float>> latents;
    latents.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Tensor<float> z(Shape{1, mc.image_height, mc.image_width, 1});
        for (auto& v : z.values()) v = static_cast<float>(rng.normal());
        latents.push_back(std::move(z));
    }
    const auto predictor = as_predictor(model);
    std::vector<GrayImage> images;
    images.reserve(count);
    for (const auto& z : latents) {
        const auto x0 = sample(z, predictor, config.steps, config.schedule);
        images.push_back(to_pixels(x0.reshaped({mc.image_height, mc.image_width, 1}), config.norm));
    }
    return images;
}

template <typename T>
NoisePredictor<T> oracle_predictor(Tensor<T> x0) {
    return [x0 = std::move(x0)](const Tensor<T>& x_t, std::span<const double> variances) {
        if (x_t.shape() != x0.shape()) {
            throw ShapeError("oracle_predictor: input " + shape_str(x_t.shape()) + " does not match " +
                             shape_str(x0.shape()));
        }
        const auto d = image_dims(x_t.shape(), "oracle_predictor");
        const std::size_t per = x_t.size() / d.batch;
        Tensor<T> eps(x_t.shape());
        for (std::size_t n = 0; n < d.batch; ++n) {
            const T s = static_cast<T>(std::sqrt(1.0 - variances[n]));
            const T z = static_cast<T>(std::sqrt(variances[n]));
            for (std::size_t i = n * per; i < (n + 1) * per; ++i) eps[i] = (x_t[i] - s * x0[i]) / z;
        }
        return eps;
    };
}

OracleReport reconstruct_oracle(std::size_t trials, std::size_t steps, std::uint64_t seed, std::size_t height,
                                std::size_t width) {
    if (trials < 1) throw std::invalid_argument("reconstruct_oracle: trials must be >= 1");
    const DiffusionSchedule schedule;
    Rng rng(seed, "oracle");
    OracleReport report{0.0, trials, steps};
    for (std::size_t k = 0; k < trials; ++k) {
        Tensor<float> x0(Shape{height, width, 1}), eps(Shape{height, width, 1});
        for (auto& v : x0.values()) v = static_cast<float>(rng.normal());
        for (auto& v : eps.values()) v = static_cast<float>(rng.normal());
        const auto latent = noisify(x0, eps, 1.0, schedule).x_t;
        const auto recovered = sample(latent, oracle_predictor(x0), steps, schedule);
        for (std::size_t i = 0; i < x0.size(); ++i) {
            report.max_error = std::max(report.max_error, std::abs(static_cast<double>(recovered[i]) - x0[i]));
        }
    }
    return report;
}

GrayImage contact_sheet(const std::vector<GrayImage>& tiles, std::size_t columns, std::size_t gutter) {
    if (tiles.empty()) throw std::invalid_argument("contact_sheet: no images");
    const std::size_t w = tiles[0].width, h = tiles[0].height;
    for (const auto& t : tiles) {
        if (t.width != w || t.height != h) throw std::invalid_argument("contact_sheet: tiles differ in size");
    }
    if (columns == 0) columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
    columns = std::min(columns, tiles.size());
    const std::size_t rows = (tiles.size() + columns - 1) / columns;
    GrayImage sheet(columns * w + (columns - 1) * gutter, rows * h + (rows - 1) * gutter, 255);
    for (std::size_t k = 0; k < tiles.size(); ++k) {
        const std::size_t top = (k / columns) * (h + gutter), left = (k % columns) * (w + gutter);
        for (std::size_t r = 0; r < h; ++r) {
            std::copy_n(tiles[k].pixels.begin() + r * w, w, sheet.pixels.begin() + (top + r) * sheet.width + left);
        }
    }
    return sheet;
}

template ReverseStep<float> reverse_step(const NoisePredictor<float>&, const Tensor<float>&, double, double,
                                         const DiffusionSchedule&);
template ReverseStep<double> reverse_step(const NoisePredictor<double>&, const Tensor<double>&, double, double,
                                          const DiffusionSchedule&);
template NoisePredictor<float> oracle_predictor(Tensor<float>);
template NoisePredictor<double> oracle_predictor(Tensor<double>);
template Tensor<float> sample(const Tensor<float>&, const NoisePredictor<float>&, std::size_t,
                              const DiffusionSchedule&);
template Tensor<double> sample(const Tensor<double>&, const NoisePredictor<double>&, std::size_t,
                               const DiffusionSchedule&);

}  // namespace ddim
