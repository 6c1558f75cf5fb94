#include "ddim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "ddim/autodiff.hpp"
#include "ddim/diffusion.hpp"

namespace ddim {

NormStats compute_norm_stats(std::span<const Tensor<float>> corpus) {
    if (corpus.empty()) throw std::invalid_argument("compute_norm_stats: empty corpus");
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& img : corpus) {
        for (float p : img.values()) sum += p;
        count += img.size();
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (const auto& img : corpus) {
        for (float p : img.values()) sq += (p - mean) * (p - mean);
    }
    const double std = std::sqrt(sq / static_cast<double>(count));
    if (!(std > 0.0)) throw std::invalid_argument("compute_norm_stats: corpus has zero pixel variance");
    return {mean, std};
}

std::vector<Tensor<float>> normalize_corpus(std::span<const Tensor<float>> corpus, const NormStats& stats) {
    std::vector<Tensor<float>> out;
    out.reserve(corpus.size());
    for (const auto& img : corpus) {
        Tensor<float> z(img.shape());
        for (std::size_t i = 0; i < img.size(); ++i) z[i] = static_cast<float>(stats.normalize(img[i]));
        out.push_back(std::move(z));
    }
    return out;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("train: learning rate must be non-negative");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("train: moment decays must lie in [0,1)");
    }
}

AdamW::AdamW(const TrainConfig& config)
    : lr_(config.learning_rate),
      wd_(config.weight_decay),
      beta1_(config.beta1),
      beta2_(config.beta2),
      epsilon_(config.epsilon) {}

void AdamW::step(std::map<std::string, Tensor<float>>& params, const std::map<std::string, Tensor<float>>& grads) {
    ++step_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    const float decay = static_cast<float>(lr_ * wd_);
    const float lr = static_cast<float>(lr_);
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float inv_c1 = static_cast<float>(1.0 / c1), inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(epsilon_);
    for (auto& [name, p] : params) {
        const auto& g = grads.at(name);
        if (g.shape() != p.shape()) throw ShapeError("adamw: gradient shape mismatch for " + name);
        auto [mit, m_new] = m_.try_emplace(name, p.shape());
        auto [vit, v_new] = v_.try_emplace(name, p.shape());
        auto& m = mit->second;
        auto& v = vit->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const float m_hat = m[i] * inv_c1;
            const float v_hat = v[i] * inv_c2;
            p[i] -= decay * p[i];
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

Trainer::Trainer(UNet<float>& model, TrainConfig config, DiffusionSchedule schedule)
    : model_(model), config_(config), schedule_(schedule), optimizer_(config), rng_(config.seed, "training") {
    config_.validate();
}

double Trainer::train_step(const Tensor<float>& x0_batch) {
    const auto d = image_dims(x0_batch.shape(), "train_step");
    std::vector<double> times(d.batch);
    for (auto& t : times) t = rng_.uniform();
    Tensor<float> eps(x0_batch.shape());
    for (auto& e : eps.values()) e = static_cast<float>(rng_.normal());
    return train_step(x0_batch, times, eps);
}

namespace {

std::string first_non_finite(const std::map<std::string, Tensor<float>>& tensors) {
    for (const auto& [name, t] : tensors) {
        for (float v : t.values()) {
            if (!std::isfinite(v)) return name;
        }
    }
    return {};
}

}  // namespace

double Trainer::train_step(const Tensor<float>& x0_batch, std::span<const double> times, const Tensor<float>& eps) {
    const auto d = image_dims(x0_batch.shape(), "train_step");
    if (x0_batch.rank() != 4) throw ShapeError("train_step: expected a [B,H,W,1] batch");
    if (times.size() != d.batch) throw ShapeError("train_step: one diffusion time per image required");
    if (eps.shape() != x0_batch.shape()) throw ShapeError("train_step: noise shape does not match batch");

    const std::size_t per = x0_batch.size() / d.batch;
    const Shape image{d.height, d.width, d.channels};
    Tensor<float> x_t(x0_batch.shape());
    std::vector<double> variances(d.batch);
    for (std::size_t n = 0; n < d.batch; ++n) {
        auto slice = [&](const Tensor<float>& src) {
            return Tensor<float>(image, std::vector<float>(src.data() + n * per, src.data() + (n + 1) * per));
        };
        const auto pair = noisify(slice(x0_batch), slice(eps), times[n], schedule_);
        std::copy(pair.x_t.data(), pair.x_t.data() + per, x_t.data() + n * per);
        variances[n] = pair.noise_rate * pair.noise_rate;
    }

    ad::Tape<float> tape;
    auto fwd = model_.forward(tape, x_t, variances, NormMode::batch_statistics);
    auto loss = ad::mean_abs(fwd.eps_pred, tape.constant(eps));
    const double value = loss.value()[0];
    if (!std::isfinite(value)) {
        const auto bad = first_non_finite(model_.parameters());
        throw NonFiniteLoss("training loss is not finite; " +
                            (bad.empty() ? std::string("all parameters finite") : "first non-finite parameter: " + bad));
    }
    tape.backward(loss);

    std::map<std::string, Tensor<float>> grads;
    for (const auto& [name, var] : fwd.params) grads.emplace(name, var.grad());
    optimizer_.step(model_.parameters(), grads);
    model_.update_running_statistics(fwd.norm_statistics);
    return value;
}

std::vector<double> Trainer::fit(std::span<const Tensor<float>> corpus,
                                 const std::function<void(std::size_t, double)>& on_epoch) {
    if (corpus.empty()) throw std::invalid_argument("fit: empty corpus");
    std::vector<std::size_t> order(corpus.size());
    std::vector<double> log;
    for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng_);
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
            const std::size_t end = std::min(order.size(), start + config_.batch_size);
            const auto batch = stack_batch(corpus, std::span(order).subspan(start, end - start));
            total += train_step(batch);
            ++steps;
        }
        log.push_back(total / static_cast<double>(steps));
        if (on_epoch) on_epoch(epoch, log.back());
    }
    return log;
}

Tensor<float> stack_batch(std::span<const Tensor<float>> images, std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("stack_batch: no images selected");
    const Shape& s = images[indices[0]].shape();
    if (s.size() != 3) throw ShapeError("stack_batch: images must be [H,W,C], got " + shape_str(s));
    const std::size_t per = images[indices[0]].size();
    Tensor<float> batch(Shape{indices.size(), s[0], s[1], s[2]});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto& img = images[indices[k]];
        if (img.shape() != s) throw ShapeError("stack_batch: mixed image shapes");
        std::copy(img.data(), img.data() + per, batch.data() + k * per);
    }
    return batch;
}

std::string format_loss_line(std::size_t epoch, double loss) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f", epoch, loss);
    return buf;
}

}  // namespace ddim
