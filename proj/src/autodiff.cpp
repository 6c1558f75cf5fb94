#include "ddim/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "ddim/kernels.hpp"

namespace ddim::ad {

template <typename T>
const Tensor<T>& Var<T>::value() const {
    return tape_->node(*this).value;
}

template <typename T>
const Tensor<T>& Var<T>::grad() const {
    return tape_->node(*this).grad;
}

template <typename T>
bool Var<T>::requires_grad() const {
    return tape_->node(*this).requires_grad;
}

template <typename T>
typename Tape<T>::Node& Tape<T>::node(const Var<T>& v) {
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw std::logic_error("variable does not belong to this tape");
    return nodes_[v.id_];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(const Var<T>& v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw std::logic_error("variable does not belong to this tape");
    return nodes_[v.id_];
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, false, {}});
    return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::parameter(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, recording_, {}});
    return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward) {
    bool needs = false;
    if (recording_) {
        for (const auto& in : inputs) {
            if (in.valid() && node(in).requires_grad) needs = true;
        }
    }
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
    return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::accumulate(const Var<T>& v, const Tensor<T>& g) {
    if (!v.valid()) return;
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (g.shape() != n.value.shape()) {
        throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match value " +
                         shape_str(n.value.shape()));
    }
    if (n.grad.empty()) {
        n.grad = g;
    } else {
        for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    }
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss, T seed) {
    Node& root = node(loss);
    if (root.value.size() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_str(root.value.shape()));
    }
    if (!recording_) throw std::logic_error("backward on a tape that was not recording");
    for (auto& n : nodes_) {
        if (n.requires_grad) n.grad = Tensor<T>(n.value.shape());
    }
    root.grad = Tensor<T>(root.value.shape(), seed);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backward) n.backward(n.grad);
    }
}

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias) {
    Tape<T>* tape = input.tape();
    auto out = kernels::conv2d(input.value(), kernel.value(), bias.value());
    return tape->record(std::move(out), {input, kernel, bias}, [tape, input, kernel, bias](const Tensor<T>& g) {
        auto grads = kernels::conv2d_backward(input.value(), kernel.value(), g, input.requires_grad());
        if (input.requires_grad()) tape->accumulate(input, grads.input);
        tape->accumulate(kernel, grads.kernel);
        tape->accumulate(bias, grads.bias);
    });
}

template <typename T>
Var<T> avgpool2(const Var<T>& input) {
    Tape<T>* tape = input.tape();
    return tape->record(kernels::avgpool2(input.value()), {input}, [tape, input](const Tensor<T>& g) {
        tape->accumulate(input, kernels::avgpool2_backward(g, input.shape()));
    });
}

template <typename T>
Var<T> upsample_bilinear2(const Var<T>& input) {
    Tape<T>* tape = input.tape();
    return tape->record(kernels::upsample_bilinear2(input.value()), {input}, [tape, input](const Tensor<T>& g) {
        tape->accumulate(input, kernels::upsample_bilinear2_backward(g, input.shape()));
    });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
    if (!a.valid()) return b;
    if (!b.valid()) return a;
    Tape<T>* tape = a.tape();
    const std::size_t ca = a.shape().back();
    return tape->record(kernels::concat_channels(a.value(), b.value()), {a, b},
                        [tape, a, b, ca](const Tensor<T>& g) {
                            auto [ga, gb] = kernels::split_channels(g, ca);
                            tape->accumulate(a, ga);
                            tape->accumulate(b, gb);
                        });
}

template <typename T>
Var<T> swish(const Var<T>& x) {
    Tape<T>* tape = x.tape();
    return tape->record(kernels::swish(x.value()), {x}, [tape, x](const Tensor<T>& g) {
        tape->accumulate(x, kernels::swish_backward(x.value(), g));
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    Tape<T>* tape = a.tape();
    return tape->record(kernels::add(a.value(), b.value()), {a, b}, [tape, a, b](const Tensor<T>& g) {
        tape->accumulate(a, g);
        tape->accumulate(b, g);
    });
}

template <typename T>
Var<T> affine(const Var<T>& input, const Var<T>& weight, const Var<T>& bias) {
    Tape<T>* tape = input.tape();
    return tape->record(kernels::affine(input.value(), weight.value(), bias.value()), {input, weight, bias},
                        [tape, input, weight, bias](const Tensor<T>& g) {
                            auto grads = kernels::affine_backward(input.value(), weight.value(), g);
                            tape->accumulate(input, grads.input);
                            tape->accumulate(weight, grads.weight);
                            tape->accumulate(bias, grads.bias);
                        });
}

template <typename T>
Var<T> mean_abs(const Var<T>& pred, const Var<T>& target) {
    Tape<T>* tape = pred.tape();
    const T loss = kernels::mean_abs(pred.value(), target.value());
    return tape->record(Tensor<T>::scalar(loss), {pred, target}, [tape, pred, target](const Tensor<T>& g) {
        auto gp = kernels::mean_abs_backward(pred.value(), target.value(), g[0]);
        if (target.requires_grad()) {
            Tensor<T> gt(gp.shape());
            for (std::size_t i = 0; i < gp.size(); ++i) gt[i] = -gp[i];
            tape->accumulate(target, gt);
        }
        tape->accumulate(pred, gp);
    });
}

template <typename T>
Var<T> batch_norm_train(const Var<T>& x, const Var<T>& scale, T epsilon, Tensor<T>* batch_mean, Tensor<T>* batch_var) {
    Tape<T>* tape = x.tape();
    auto r = kernels::batch_norm_train(x.value(), scale.value(), epsilon);
    if (batch_mean) *batch_mean = r.mean;
    if (batch_var) *batch_var = r.var;
    return tape->record(std::move(r.output), {x, scale},
                        [tape, x, scale, mean = std::move(r.mean), inv_std = std::move(r.inv_std)](const Tensor<T>& g) {
                            auto grads = kernels::batch_norm_backward(x.value(), scale.value(), mean, inv_std, g);
                            tape->accumulate(x, grads.input);
                            tape->accumulate(scale, grads.scale);
                        });
}

template <typename T>
Var<T> batch_norm_infer(const Var<T>& x, const Var<T>& scale, const Tensor<T>& mean, const Tensor<T>& var, T epsilon) {
    Tape<T>* tape = x.tape();
    auto out = kernels::batch_norm_infer(x.value(), mean, var, scale.value(), epsilon);
    return tape->record(std::move(out), {x, scale}, [tape, x, scale, mean, var, epsilon](const Tensor<T>& g) {
        const std::size_t c = mean.size();
        Tensor<T> gx(x.shape());
        Tensor<T> gs(Shape{c});
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t ch = i % c;
            const T inv_std = T(1) / std::sqrt(var[ch] + epsilon);
            gx[i] = g[i] * scale.value()[ch] * inv_std;
            gs[ch] += g[i] * (x.value()[i] - mean[ch]) * inv_std;
        }
        tape->accumulate(x, gx);
        tape->accumulate(scale, gs);
    });
}

#define DDIM_INSTANTIATE_AD(T)                                                                          \
    template class Var<T>;                                                                              \
    template class Tape<T>;                                                                             \
    template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&);                                \
    template Var<T> avgpool2(const Var<T>&);                                                            \
    template Var<T> upsample_bilinear2(const Var<T>&);                                                  \
    template Var<T> concat_channels(const Var<T>&, const Var<T>&);                                      \
    template Var<T> swish(const Var<T>&);                                                               \
    template Var<T> add(const Var<T>&, const Var<T>&);                                                  \
    template Var<T> affine(const Var<T>&, const Var<T>&, const Var<T>&);                                \
    template Var<T> mean_abs(const Var<T>&, const Var<T>&);                                             \
    template Var<T> batch_norm_train(const Var<T>&, const Var<T>&, T, Tensor<T>*, Tensor<T>*);          \
    template Var<T> batch_norm_infer(const Var<T>&, const Var<T>&, const Tensor<T>&, const Tensor<T>&, T);

DDIM_INSTANTIATE_AD(float)
DDIM_INSTANTIATE_AD(double)

}  // namespace ddim::ad
