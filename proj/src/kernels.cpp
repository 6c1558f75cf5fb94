#include "ddim/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "ddim/parallel.hpp"

namespace ddim::kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using ConstRowVec = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Shape image_shape_like(const Shape& in, std::size_t h, std::size_t w, std::size_t c) {
    if (in.size() == 3) return {h, w, c};
    return {in[0], h, w, c};
}

// Each row of `col` holds the k*k*Cin receptive field of one output pixel,
// zero filled outside the image. Layout matches a [k,k,Cin,Cout] kernel.
template <typename T>
void im2col3(const T* img, std::size_t h, std::size_t w, std::size_t c, T* col) {
    const std::size_t row_len = 9 * c;
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            T* dst = col + (i * w + j) * row_len;
            for (int di = 0; di < 3; ++di) {
                const long si = static_cast<long>(i) + di - 1;
                for (int dj = 0; dj < 3; ++dj) {
                    const long sj = static_cast<long>(j) + dj - 1;
                    T* seg = dst + (di * 3 + dj) * c;
                    if (si < 0 || sj < 0 || si >= static_cast<long>(h) || sj >= static_cast<long>(w)) {
                        std::fill(seg, seg + c, T(0));
                    } else {
                        std::memcpy(seg, img + (si * w + sj) * c, c * sizeof(T));
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im3(const T* col, std::size_t h, std::size_t w, std::size_t c, T* img) {
    std::fill(img, img + h * w * c, T(0));
    const std::size_t row_len = 9 * c;
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const T* src = col + (i * w + j) * row_len;
            for (int di = 0; di < 3; ++di) {
                const long si = static_cast<long>(i) + di - 1;
                if (si < 0 || si >= static_cast<long>(h)) continue;
                for (int dj = 0; dj < 3; ++dj) {
                    const long sj = static_cast<long>(j) + dj - 1;
                    if (sj < 0 || sj >= static_cast<long>(w)) continue;
                    const T* seg = src + (di * 3 + dj) * c;
                    T* out = img + (si * w + sj) * c;
                    for (std::size_t ch = 0; ch < c; ++ch) out[ch] += seg[ch];
                }
            }
        }
    }
}

struct ConvDims {
    ImageDims img;
    std::size_t k, cout;
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& input, const Tensor<T>& kernel) {
    const auto img = image_dims(input.shape(), "conv2d");
    const auto& ks = kernel.shape();
    if (ks.size() != 4 || ks[0] != ks[1] || (ks[0] != 1 && ks[0] != 3)) {
        throw ShapeError("conv2d: kernel must be [3,3,Cin,Cout] or [1,1,Cin,Cout], got " + shape_str(ks));
    }
    if (ks[2] != img.channels) {
        throw ShapeError("conv2d: input " + shape_str(input.shape()) + " has " + std::to_string(img.channels) +
                         " channels but kernel " + shape_str(ks) + " expects " + std::to_string(ks[2]));
    }
    return {img, ks[0], ks[3]};
}

// Sum per-image partial results in image order.
template <typename T>
Tensor<T> ordered_sum(const std::vector<Tensor<T>>& parts) {
    Tensor<T> total = parts.front();
    for (std::size_t n = 1; n < parts.size(); ++n) {
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += parts[n][i];
    }
    return total;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias) {
    const auto [img, k, cout] = conv_dims(input, kernel);
    if (bias.shape() != Shape{cout}) {
        throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match Cout " + std::to_string(cout));
    }
    if (k == 1) {
        return affine(input, kernel.reshaped({img.channels, cout}), bias);
    }
    const std::size_t hw = img.height * img.width;
    const std::size_t row_len = 9 * img.channels;
    Tensor<T> out(image_shape_like(input.shape(), img.height, img.width, cout));
    ConstMatMap<T> kmat(kernel.data(), row_len, cout);
    ConstRowVec<T> b(bias.data(), cout);
    const long batch = static_cast<long>(img.batch);
#pragma omp parallel num_threads(num_threads())
    {
        std::vector<T> col(hw * row_len);
#pragma omp for schedule(static)
        for (long n = 0; n < batch; ++n) {
            im2col3(input.data() + n * hw * img.channels, img.height, img.width, img.channels, col.data());
            ConstMatMap<T> cmat(col.data(), hw, row_len);
            MatMap<T> omat(out.data() + n * hw * cout, hw, cout);
            omat.noalias() = cmat * kmat;
            omat.rowwise() += b;
        }
    }
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& grad_out,
                               bool need_input_grad) {
    const auto [img, k, cout] = conv_dims(input, kernel);
    require_same_shape(grad_out.shape(), image_shape_like(input.shape(), img.height, img.width, cout),
                       "conv2d_backward");
    if (k == 1) {
        auto g = affine_backward(input, kernel.reshaped({img.channels, cout}), grad_out);
        return {need_input_grad ? std::move(g.input) : Tensor<T>{}, g.weight.reshaped(kernel.shape()),
                std::move(g.bias)};
    }
    const std::size_t hw = img.height * img.width;
    const std::size_t row_len = 9 * img.channels;
    Conv2dGrads<T> grads;
    if (need_input_grad) grads.input = Tensor<T>(input.shape());
    std::vector<Tensor<T>> dk(img.batch), db(img.batch);
    ConstMatMap<T> kmat(kernel.data(), row_len, cout);
    const long batch = static_cast<long>(img.batch);
#pragma omp parallel num_threads(num_threads())
    {
        std::vector<T> col(hw * row_len);
#pragma omp for schedule(static)
        for (long n = 0; n < batch; ++n) {
            ConstMatMap<T> gmat(grad_out.data() + n * hw * cout, hw, cout);
            im2col3(input.data() + n * hw * img.channels, img.height, img.width, img.channels, col.data());
            ConstMatMap<T> cmat(col.data(), hw, row_len);
            dk[n] = Tensor<T>(kernel.shape());
            MatMap<T> dkmat(dk[n].data(), row_len, cout);
            dkmat.noalias() = cmat.transpose() * gmat;
            db[n] = Tensor<T>(Shape{cout});
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(db[n].data(), cout) = gmat.colwise().sum();
            if (need_input_grad) {
                MatMap<T> dcol(col.data(), hw, row_len);
                dcol.noalias() = gmat * kmat.transpose();
                col2im3(col.data(), img.height, img.width, img.channels,
                        grads.input.data() + n * hw * img.channels);
            }
        }
    }
    grads.kernel = ordered_sum(dk);
    grads.bias = ordered_sum(db);
    return grads;
}

template <typename T>
Tensor<T> avgpool2(const Tensor<T>& input) {
    const auto d = image_dims(input.shape(), "avgpool2");
    if (d.height % 2 || d.width % 2) {
        throw ShapeError("avgpool2: height and width must be even, got " + shape_str(input.shape()));
    }
    const std::size_t oh = d.height / 2, ow = d.width / 2, c = d.channels;
    Tensor<T> out(image_shape_like(input.shape(), oh, ow, c));
    const long rows = static_cast<long>(d.batch * oh);
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long r = 0; r < rows; ++r) {
        const std::size_t n = r / oh, i = r % oh;
        const T* top = input.data() + ((n * d.height + 2 * i) * d.width) * c;
        const T* bot = top + d.width * c;
        T* o = out.data() + (n * oh + i) * ow * c;
        for (std::size_t j = 0; j < ow; ++j) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t a = 2 * j * c + ch, b = a + c;
                o[j * c + ch] = (top[a] + top[b] + bot[a] + bot[b]) / T(4);
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> avgpool2_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
    const auto d = image_dims(input_shape, "avgpool2_backward");
    const std::size_t oh = d.height / 2, ow = d.width / 2, c = d.channels;
    require_same_shape(grad_out.shape(), image_shape_like(input_shape, oh, ow, c), "avgpool2_backward");
    Tensor<T> g(input_shape);
    const long rows = static_cast<long>(d.batch * d.height);
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long r = 0; r < rows; ++r) {
        const std::size_t n = r / d.height, i = r % d.height;
        const T* go = grad_out.data() + (n * oh + i / 2) * ow * c;
        T* gi = g.data() + r * d.width * c;
        for (std::size_t j = 0; j < d.width; ++j) {
            for (std::size_t ch = 0; ch < c; ++ch) gi[j * c + ch] = go[(j / 2) * c + ch] / T(4);
        }
    }
    return g;
}

namespace {

// Source taps of one output coordinate along an axis of length n.
template <typename T>
struct Tap {
    std::size_t lo, hi;
    T w;  // weight of hi
};

template <typename T>
std::vector<Tap<T>> bilinear_taps(std::size_t n) {
    std::vector<Tap<T>> taps(2 * n);
    for (std::size_t o = 0; o < 2 * n; ++o) {
        T src = (static_cast<T>(o) + T(0.5)) / T(2) - T(0.5);
        src = std::clamp(src, T(0), static_cast<T>(n - 1));
        const auto lo = static_cast<std::size_t>(std::floor(src));
        const std::size_t hi = std::min(lo + 1, n - 1);
        taps[o] = {lo, hi, src - static_cast<T>(lo)};
    }
    return taps;
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear2(const Tensor<T>& input) {
    const auto d = image_dims(input.shape(), "upsample_bilinear2");
    const std::size_t oh = 2 * d.height, ow = 2 * d.width, c = d.channels;
    const auto ty = bilinear_taps<T>(d.height);
    const auto tx = bilinear_taps<T>(d.width);
    Tensor<T> out(image_shape_like(input.shape(), oh, ow, c));
    const long rows = static_cast<long>(d.batch * oh);
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long r = 0; r < rows; ++r) {
        const std::size_t n = r / oh, i = r % oh;
        const auto& y = ty[i];
        const T* base = input.data() + n * d.height * d.width * c;
        const T* r0 = base + y.lo * d.width * c;
        const T* r1 = base + y.hi * d.width * c;
        T* o = out.data() + r * ow * c;
        for (std::size_t j = 0; j < ow; ++j) {
            const auto& x = tx[j];
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T top = (T(1) - x.w) * r0[x.lo * c + ch] + x.w * r0[x.hi * c + ch];
                const T bot = (T(1) - x.w) * r1[x.lo * c + ch] + x.w * r1[x.hi * c + ch];
                o[j * c + ch] = (T(1) - y.w) * top + y.w * bot;
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> upsample_bilinear2_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
    const auto d = image_dims(input_shape, "upsample_bilinear2_backward");
    const std::size_t oh = 2 * d.height, ow = 2 * d.width, c = d.channels;
    require_same_shape(grad_out.shape(), image_shape_like(input_shape, oh, ow, c), "upsample_bilinear2_backward");
    const auto ty = bilinear_taps<T>(d.height);
    const auto tx = bilinear_taps<T>(d.width);
    Tensor<T> g(input_shape);
    const long batch = static_cast<long>(d.batch);
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long n = 0; n < batch; ++n) {
        T* base = g.data() + n * d.height * d.width * c;
        for (std::size_t i = 0; i < oh; ++i) {
            const auto& y = ty[i];
            const T* go = grad_out.data() + (n * oh + i) * ow * c;
            T* r0 = base + y.lo * d.width * c;
            T* r1 = base + y.hi * d.width * c;
            for (std::size_t j = 0; j < ow; ++j) {
                const auto& x = tx[j];
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const T v = go[j * c + ch];
                    const T top = (T(1) - y.w) * v, bot = y.w * v;
                    r0[x.lo * c + ch] += (T(1) - x.w) * top;
                    r0[x.hi * c + ch] += x.w * top;
                    r1[x.lo * c + ch] += (T(1) - x.w) * bot;
                    r1[x.hi * c + ch] += x.w * bot;
                }
            }
        }
    }
    return g;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape().empty()) return b;
    if (b.shape().empty()) return a;
    const auto da = image_dims(a.shape(), "concat_channels");
    const auto db = image_dims(b.shape(), "concat_channels");
    if (a.rank() != b.rank() || da.batch != db.batch || da.height != db.height || da.width != db.width) {
        throw ShapeError("concat_channels: spatial mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const std::size_t c = da.channels + db.channels;
    Tensor<T> out(image_shape_like(a.shape(), da.height, da.width, c));
    const std::size_t pixels = da.pixels();
    for (std::size_t p = 0; p < pixels; ++p) {
        std::memcpy(out.data() + p * c, a.data() + p * da.channels, da.channels * sizeof(T));
        std::memcpy(out.data() + p * c + da.channels, b.data() + p * db.channels, db.channels * sizeof(T));
    }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& grad, std::size_t channels_a) {
    const auto d = image_dims(grad.shape(), "split_channels");
    if (channels_a == 0) return {Tensor<T>{}, grad};
    if (channels_a == d.channels) return {grad, Tensor<T>{}};
    if (channels_a > d.channels) throw ShapeError("split_channels: split point beyond channel count");
    const std::size_t cb = d.channels - channels_a;
    Tensor<T> a(image_shape_like(grad.shape(), d.height, d.width, channels_a));
    Tensor<T> b(image_shape_like(grad.shape(), d.height, d.width, cb));
    for (std::size_t p = 0; p < d.pixels(); ++p) {
        std::memcpy(a.data() + p * channels_a, grad.data() + p * d.channels, channels_a * sizeof(T));
        std::memcpy(b.data() + p * cb, grad.data() + p * d.channels + channels_a, cb * sizeof(T));
    }
    return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> swish(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long i = 0; i < n; ++i) {
        const T v = x[i];
        out[i] = v / (T(1) + std::exp(-v));
    }
    return out;
}

template <typename T>
Tensor<T> swish_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    require_same_shape(x.shape(), grad_out.shape(), "swish_backward");
    Tensor<T> g(x.shape());
    const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long i = 0; i < n; ++i) {
        const T v = x[i];
        const T s = T(1) / (T(1) + std::exp(-v));
        g[i] = grad_out[i] * (s + v * s * (T(1) - s));
    }
    return g;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <typename T>
Tensor<T> affine(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (weight.rank() != 2) throw ShapeError("affine: weight must be [N,M], got " + shape_str(weight.shape()));
    const std::size_t n = weight.dim(0), m = weight.dim(1);
    if (input.shape().back() != n) {
        throw ShapeError("affine: input " + shape_str(input.shape()) + " inner dimension does not match weight " +
                         shape_str(weight.shape()));
    }
    if (bias.shape() != Shape{m}) throw ShapeError("affine: bias " + shape_str(bias.shape()) + " expected [" +
                                                   std::to_string(m) + "]");
    const std::size_t rows = input.size() / n;
    Shape out_shape = input.shape();
    out_shape.back() = m;
    Tensor<T> out(out_shape);
    ConstMatMap<T> in(input.data(), rows, n);
    ConstMatMap<T> w(weight.data(), n, m);
    MatMap<T> o(out.data(), rows, m);
    o.noalias() = in * w;
    o.rowwise() += ConstRowVec<T>(bias.data(), m);
    return out;
}

template <typename T>
AffineGrads<T> affine_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out) {
    const std::size_t n = weight.dim(0), m = weight.dim(1);
    const std::size_t rows = input.size() / n;
    if (grad_out.size() != rows * m) throw ShapeError("affine_backward: gradient shape " +
                                                      shape_str(grad_out.shape()) + " does not match output");
    AffineGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weight.shape()), Tensor<T>(Shape{m})};
    ConstMatMap<T> in(input.data(), rows, n);
    ConstMatMap<T> w(weight.data(), n, m);
    ConstMatMap<T> go(grad_out.data(), rows, m);
    MatMap<T>(g.input.data(), rows, n).noalias() = go * w.transpose();
    MatMap<T>(g.weight.data(), n, m).noalias() = in.transpose() * go;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.bias.data(), m) = go.colwise().sum();
    return g;
}

template <typename T>
T mean_abs(const Tensor<T>& pred, const Tensor<T>& target) {
    require_same_shape(pred.shape(), target.shape(), "mean_abs");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(static_cast<double>(pred[i]) - target[i]);
    return static_cast<T>(sum / static_cast<double>(pred.size()));
}

template <typename T>
Tensor<T> mean_abs_backward(const Tensor<T>& pred, const Tensor<T>& target, T grad_out) {
    require_same_shape(pred.shape(), target.shape(), "mean_abs_backward");
    Tensor<T> g(pred.shape());
    const T scale = grad_out / static_cast<T>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const T diff = pred[i] - target[i];
        g[i] = diff > T(0) ? scale : (diff < T(0) ? -scale : T(0));
    }
    return g;
}

namespace {

// Per-channel sums over all pixels, accumulated per image then in image order.
template <typename T, typename F>
std::vector<double> channel_sums(const ImageDims& d, F&& value) {
    const std::size_t hw = d.height * d.width, c = d.channels;
    std::vector<std::vector<double>> parts(d.batch, std::vector<double>(c, 0.0));
    const long batch = static_cast<long>(d.batch);
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long n = 0; n < batch; ++n) {
        auto& acc = parts[n];
        for (std::size_t p = n * hw; p < (n + 1) * hw; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += value(p * c + ch, ch);
        }
    }
    std::vector<double> total(c, 0.0);
    for (const auto& part : parts) {
        for (std::size_t ch = 0; ch < c; ++ch) total[ch] += part[ch];
    }
    return total;
}

}  // namespace

template <typename T>
BatchNormResult<T> batch_norm_train(const Tensor<T>& x, const Tensor<T>& scale, T epsilon) {
    const auto d = image_dims(x.shape(), "batch_norm");
    const std::size_t c = d.channels;
    if (scale.shape() != Shape{c}) throw ShapeError("batch_norm: scale " + shape_str(scale.shape()) +
                                                    " does not match channels of " + shape_str(x.shape()));
    const double count = static_cast<double>(d.pixels());
    const auto sums = channel_sums<T>(d, [&](std::size_t i, std::size_t) { return static_cast<double>(x[i]); });
    std::vector<double> mean(c);
    for (std::size_t ch = 0; ch < c; ++ch) mean[ch] = sums[ch] / count;
    const auto sq = channel_sums<T>(d, [&](std::size_t i, std::size_t ch) {
        const double dv = x[i] - mean[ch];
        return dv * dv;
    });
    BatchNormResult<T> r{Tensor<T>(x.shape()), Tensor<T>(Shape{c}), Tensor<T>(Shape{c}), Tensor<T>(Shape{c})};
    for (std::size_t ch = 0; ch < c; ++ch) {
        r.mean[ch] = static_cast<T>(mean[ch]);
        r.var[ch] = static_cast<T>(sq[ch] / count);
        r.inv_std[ch] = static_cast<T>(1.0 / std::sqrt(sq[ch] / count + static_cast<double>(epsilon)));
    }
    const long pixels = static_cast<long>(d.pixels());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            r.output[i] = (x[i] - r.mean[ch]) * r.inv_std[ch] * scale[ch];
        }
    }
    return r;
}

template <typename T>
Tensor<T> batch_norm_infer(const Tensor<T>& x, const Tensor<T>& mean, const Tensor<T>& var, const Tensor<T>& scale,
                           T epsilon) {
    const auto d = image_dims(x.shape(), "batch_norm");
    const std::size_t c = d.channels;
    if (scale.shape() != Shape{c} || mean.shape() != Shape{c} || var.shape() != Shape{c}) {
        throw ShapeError("batch_norm: statistics do not match channels of " + shape_str(x.shape()));
    }
    std::vector<T> inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = T(1) / std::sqrt(var[ch] + epsilon);
    Tensor<T> out(x.shape());
    const long pixels = static_cast<long>(d.pixels());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            out[i] = (x[i] - mean[ch]) * inv_std[ch] * scale[ch];
        }
    }
    return out;
}

template <typename T>
BatchNormGrads<T> batch_norm_backward(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& mean,
                                      const Tensor<T>& inv_std, const Tensor<T>& grad_out) {
    require_same_shape(x.shape(), grad_out.shape(), "batch_norm_backward");
    const auto d = image_dims(x.shape(), "batch_norm_backward");
    const std::size_t c = d.channels;
    const double count = static_cast<double>(d.pixels());
    auto xhat = [&](std::size_t i, std::size_t ch) {
        return (static_cast<double>(x[i]) - mean[ch]) * static_cast<double>(inv_std[ch]);
    };
    const auto sum_g = channel_sums<T>(d, [&](std::size_t i, std::size_t) { return static_cast<double>(grad_out[i]); });
    const auto sum_gx = channel_sums<T>(
        d, [&](std::size_t i, std::size_t ch) { return static_cast<double>(grad_out[i]) * xhat(i, ch); });
    BatchNormGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(Shape{c})};
    for (std::size_t ch = 0; ch < c; ++ch) g.scale[ch] = static_cast<T>(sum_gx[ch]);
    const long pixels = static_cast<long>(d.pixels());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (long p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            const double k = static_cast<double>(scale[ch]) * inv_std[ch] / count;
            g.input[i] = static_cast<T>(k * (count * grad_out[i] - sum_g[ch] - xhat(i, ch) * sum_gx[ch]));
        }
    }
    return g;
}

#define DDIM_INSTANTIATE_KERNELS(T)                                                                          \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
    template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);     \
    template Tensor<T> avgpool2(const Tensor<T>&);                                                           \
    template Tensor<T> avgpool2_backward(const Tensor<T>&, const Shape&);                                    \
    template Tensor<T> upsample_bilinear2(const Tensor<T>&);                                                 \
    template Tensor<T> upsample_bilinear2_backward(const Tensor<T>&, const Shape&);                          \
    template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                  \
    template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, std::size_t);                  \
    template Tensor<T> swish(const Tensor<T>&);                                                              \
    template Tensor<T> swish_backward(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                              \
    template Tensor<T> affine(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
    template AffineGrads<T> affine_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
    template T mean_abs(const Tensor<T>&, const Tensor<T>&);                                                 \
    template Tensor<T> mean_abs_backward(const Tensor<T>&, const Tensor<T>&, T);                             \
    template BatchNormResult<T> batch_norm_train(const Tensor<T>&, const Tensor<T>&, T);                     \
    template Tensor<T> batch_norm_infer(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                \
                                        const Tensor<T>&, T);                                                \
    template BatchNormGrads<T> batch_norm_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                                   const Tensor<T>&, const Tensor<T>&);

DDIM_INSTANTIATE_KERNELS(float)
DDIM_INSTANTIATE_KERNELS(double)

}  // namespace ddim::kernels
