#pragma once

// Naive reference implementations and finite-difference helpers, written
// independently of the production kernels.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ddim/tensor.hpp"

namespace oracle {

using ddim::Shape;
using ddim::Tensor;

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor<T> t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<T>(dist(gen));
    return t;
}

// Quadruple-loop convolution, [N,H,W,Cin] x [k,k,Cin,Cout], zero padding k/2.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::size_t n = x.dim(0), h = x.dim(1), wd = x.dim(2), ci = x.dim(3);
    const std::size_t k = w.dim(0), co = w.dim(3);
    const long pad = static_cast<long>(k / 2);
    Tensor<T> y(Shape{n, h, wd, co});
    for (std::size_t b_ = 0; b_ < n; ++b_)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < wd; ++j)
                for (std::size_t o = 0; o < co; ++o) {
                    double acc = b[o];
                    for (std::size_t di = 0; di < k; ++di)
                        for (std::size_t dj = 0; dj < k; ++dj) {
                            const long si = static_cast<long>(i + di) - pad, sj = static_cast<long>(j + dj) - pad;
                            if (si < 0 || sj < 0 || si >= static_cast<long>(h) || sj >= static_cast<long>(wd)) continue;
                            for (std::size_t c = 0; c < ci; ++c) {
                                acc += static_cast<double>(x.at({b_, std::size_t(si), std::size_t(sj), c})) *
                                       w.at({di, dj, c, o});
                            }
                        }
                    y.at({b_, i, j, o}) = static_cast<T>(acc);
                }
    return y;
}

template <typename T>
Tensor<T> avgpool2(const Tensor<T>& x) {
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    Tensor<T> y(Shape{n, h / 2, w / 2, c});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < h / 2; ++i)
            for (std::size_t j = 0; j < w / 2; ++j)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    T s = x.at({b, 2 * i, 2 * j, ch}) + x.at({b, 2 * i, 2 * j + 1, ch}) +
                          x.at({b, 2 * i + 1, 2 * j, ch}) + x.at({b, 2 * i + 1, 2 * j + 1, ch});
                    y.at({b, i, j, ch}) = s / T(4);
                }
    return y;
}

// Samples the input at ((i+0.5)/2 - 0.5, (j+0.5)/2 - 0.5), clamped.
template <typename T>
Tensor<T> upsample_bilinear2(const Tensor<T>& x) {
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    Tensor<T> y(Shape{n, 2 * h, 2 * w, c});
    auto clampd = [](double v, double hi) { return std::clamp(v, 0.0, hi); };
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < 2 * h; ++i)
            for (std::size_t j = 0; j < 2 * w; ++j) {
                const double sy = clampd((i + 0.5) / 2.0 - 0.5, double(h - 1));
                const double sx = clampd((j + 0.5) / 2.0 - 0.5, double(w - 1));
                const std::size_t y0 = std::size_t(std::floor(sy)), x0 = std::size_t(std::floor(sx));
                const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
                const double fy = sy - y0, fx = sx - x0;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double v = (1 - fy) * ((1 - fx) * x.at({b, y0, x0, ch}) + fx * x.at({b, y0, x1, ch})) +
                                     fy * ((1 - fx) * x.at({b, y1, x0, ch}) + fx * x.at({b, y1, x1, ch}));
                    y.at({b, i, j, ch}) = static_cast<T>(v);
                }
            }
    return y;
}

// Row-vector times matrix plus bias over the last axis.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::size_t nin = w.dim(0), nout = w.dim(1), rows = x.size() / nin;
    Shape s = x.shape();
    s.back() = nout;
    Tensor<T> y(s);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < nout; ++o) {
            double acc = b[o];
            for (std::size_t k = 0; k < nin; ++k) acc += static_cast<double>(x[r * nin + k]) * w[k * nout + o];
            y[r * nout + o] = static_cast<T>(acc);
        }
    return y;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& scale, double eps) {
    const std::size_t c = x.shape().back(), rows = x.size() / c;
    Tensor<T> y(x.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        double m = 0, v = 0;
        for (std::size_t r = 0; r < rows; ++r) m += x[r * c + ch];
        m /= rows;
        for (std::size_t r = 0; r < rows; ++r) v += (x[r * c + ch] - m) * (x[r * c + ch] - m);
        v /= rows;
        for (std::size_t r = 0; r < rows; ++r) {
            y[r * c + ch] = static_cast<T>((x[r * c + ch] - m) / std::sqrt(v + eps) * scale[ch]);
        }
    }
    return y;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

// Max-norm relative error: max|a - n| / max(max|n|, floor).
inline double relative_error(const Tensor<double>& analytic, const Tensor<double>& numeric, double floor = 1e-12) {
    double diff = 0.0, scale = floor;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max(scale, std::abs(numeric[i]));
    }
    return diff / scale;
}

// Central differences of a scalar function of one tensor.
inline Tensor<double> numeric_gradient(const std::function<double(const Tensor<double>&)>& f, Tensor<double> x,
                                       double h = 1e-4) {
    Tensor<double> g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

}  // namespace oracle
