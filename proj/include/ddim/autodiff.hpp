#pragma once

// Reverse-mode differentiation over a recorded tape. A Tape owns every value
// produced during one forward pass; Var is a lightweight handle into it.
// Nodes are appended in creation order and backward() visits them in strict
// reverse order, so each node's gradient is complete before it is consumed.

#include <deque>
#include <functional>

#include "ddim/tensor.hpp"

namespace ddim::ad {

template <typename T>
class Tape;

template <typename T>
class Var {
public:
    Var() = default;

    const Tensor<T>& value() const;
    const Tensor<T>& grad() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    bool valid() const { return tape_ != nullptr; }
    Tape<T>* tape() const { return tape_; }
    std::size_t id() const { return id_; }

private:
    friend class Tape<T>;
    Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

template <typename T>
class Tape {
public:
    // When recording is off no gradient closures are kept.
    explicit Tape(bool recording = true) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> constant(Tensor<T> value);
    Var<T> parameter(Tensor<T> value);

    bool recording() const { return recording_; }
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = seed and propagates to every reachable input.
    void backward(const Var<T>& loss, T seed = T(1));

    // Used by operator implementations.
    using BackwardFn = std::function<void(const Tensor<T>& grad_out)>;
    Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward);
    void accumulate(const Var<T>& v, const Tensor<T>& g);

private:
    friend class Var<T>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Node& node(const Var<T>& v);
    const Node& node(const Var<T>& v) const;

    std::deque<Node> nodes_;
    bool recording_;
};

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias);
template <typename T>
Var<T> avgpool2(const Var<T>& input);
template <typename T>
Var<T> upsample_bilinear2(const Var<T>& input);
// An invalid (default-constructed) operand stands for a zero-channel tensor.
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> swish(const Var<T>& x);
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> affine(const Var<T>& input, const Var<T>& weight, const Var<T>& bias);
template <typename T>
Var<T> mean_abs(const Var<T>& pred, const Var<T>& target);

// Normalization with batch statistics; the statistics used are written to
// batch_mean / batch_var when provided.
template <typename T>
Var<T> batch_norm_train(const Var<T>& x, const Var<T>& scale, T epsilon, Tensor<T>* batch_mean = nullptr,
                        Tensor<T>* batch_var = nullptr);
// Normalization with fixed statistics.
template <typename T>
Var<T> batch_norm_infer(const Var<T>& x, const Var<T>& scale, const Tensor<T>& mean, const Tensor<T>& var,
                        T epsilon);

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Var<float>;
extern template class Var<double>;

}  // namespace ddim::ad
