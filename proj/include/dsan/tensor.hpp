// SPDX-License-Identifier: Apache-2.0
//
// NCHW tensor value type with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle to a TensorImpl. Forward ops never mutate
// their inputs; they allocate a fresh result and, when any input tracks
// gradients, attach a TapeNode holding the backward rule. backward() walks
// the recorded DAG once in reverse topological order and then releases it,
// so a graph can be differentiated exactly once per forward pass.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct TensorImpl;

template <typename T>
struct TapeNode {
    std::string_view op;
    std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
    // Reads out.grad and accumulates into the grads of `inputs`.
    std::function<void(const TensorImpl<T>& out)> backward;
    bool consumed = false;
};

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad; // empty until the first accumulation
    bool requires_grad = false;
    bool backward_done = false;
    std::shared_ptr<TapeNode<T>> node;

    // Zero-initialised on first use.
    std::span<T> grad_buffer()
    {
        if (grad.size() != data.size())
            grad.assign(data.size(), T(0));
        return grad;
    }
};

// Thread-local switch; while disabled, ops record nothing.
class GradMode {
public:
    static bool enabled();
    static void set_enabled(bool on);
};

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0));
    Tensor(Shape shape, std::vector<T> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
    static Tensor scalar(T value) { return Tensor(Shape{1}, value); }

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const T> data() const;
    // Only leaves may be written in place (parameters, injected inputs).
    std::span<T> mutable_data();
    T item() const;
    T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const T> grad() const;
    void zero_grad();

    void backward();

    // Same values, no history.
    Tensor detach() const;

    template <typename U>
    Tensor<U> cast() const
    {
        std::vector<U> out(numel());
        auto src = data();
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<U>(src[i]);
        return Tensor<U>(shape(), std::move(out));
    }

    const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

private:
    void require_defined() const;
    std::shared_ptr<TensorImpl<T>> impl_;
};

// Wraps freshly computed values as an op result, recording a tape node when
// grad mode is on and at least one input requires gradients.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      std::initializer_list<Tensor<T>> inputs,
                      std::function<void(const TensorImpl<T>&)> backward);

// Unnormalised 2-D spectrum of an N x C x H x W real tensor.
template <typename T>
struct ComplexSpectrum {
    Shape shape;
    std::vector<T> real;
    std::vector<T> imag;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

} // namespace dsan
