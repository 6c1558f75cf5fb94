#include "ddim/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ddim {

namespace {

void require_same(const Shape& a, const Shape& b, const char* what) {
    if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// a * x + b * y elementwise.
template <typename T>
Tensor<T> mix(const Tensor<T>& x, T a, const Tensor<T>& y, T b) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

}  // namespace

template <typename T>
NoisyPair<T> noisify(const Tensor<T>& x0, const Tensor<T>& eps, double t, const DiffusionSchedule& schedule) {
    require_same(x0.shape(), eps.shape(), "noisify");
    const Rates r = schedule.rates(t);
    return {mix(x0, static_cast<T>(r.signal), eps, static_cast<T>(r.noise)), eps, t, r.signal, r.noise};
}

template <typename T>
Tensor<T> single_step(const Tensor<T>& x_prev, const Tensor<T>& eps, double beta) {
    require_same(x_prev.shape(), eps.shape(), "single_step");
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("single_step: beta must lie in (0,1), got " + std::to_string(beta));
    }
    return mix(x_prev, static_cast<T>(std::sqrt(1.0 - beta)), eps, static_cast<T>(std::sqrt(beta)));
}

template <typename T>
Tensor<T> collinear_point(const Tensor<T>& x0, const Tensor<T>& eps_shared, const Tensor<T>& eps_fresh,
                          double t_target, double sigma, const DiffusionSchedule& schedule) {
    require_same(x0.shape(), eps_shared.shape(), "collinear_point");
    require_same(x0.shape(), eps_fresh.shape(), "collinear_point");
    const Rates r = schedule.rates(t_target);
    if (!(sigma >= 0.0 && sigma <= r.noise)) {
        throw std::invalid_argument("collinear_point: sigma " + std::to_string(sigma) +
                                    " exceeds the bound noise_rate(t)=" + std::to_string(r.noise) +
                                    " (sigma^2 <= 1 - alpha_bar)");
    }
    // sqrt(n*n) == n exactly in IEEE arithmetic, so sigma = 0 reproduces noisify bit for bit.
    const double shared = std::sqrt((r.noise - sigma) * (r.noise + sigma));
    Tensor<T> out = mix(x0, static_cast<T>(r.signal), eps_shared, static_cast<T>(shared));
    if (sigma > 0.0) {
        const T s = static_cast<T>(sigma);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * eps_fresh[i];
    }
    return out;
}

template NoisyPair<float> noisify(const Tensor<float>&, const Tensor<float>&, double, const DiffusionSchedule&);
template NoisyPair<double> noisify(const Tensor<double>&, const Tensor<double>&, double, const DiffusionSchedule&);
template Tensor<float> single_step(const Tensor<float>&, const Tensor<float>&, double);
template Tensor<double> single_step(const Tensor<double>&, const Tensor<double>&, double);
template Tensor<float> collinear_point(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, double,
                                       double, const DiffusionSchedule&);
template Tensor<double> collinear_point(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, double,
                                        double, const DiffusionSchedule&);

}  // namespace ddim
