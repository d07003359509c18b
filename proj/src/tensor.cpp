// SPDX-License-Identifier: Apache-2.0
#include "dsan/tensor.hpp"

#include "dsan/error.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

namespace dsan {

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "x" : "") << shape[i];
    os << ')';
    return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

NoGradGuard::NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
NoGradGuard::~NoGradGuard() { GradMode::set_enabled(previous_); }

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<TensorImpl<T>>())
{
    impl_->data.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : impl_(std::make_shared<TensorImpl<T>>())
{
    if (shape_numel(shape) != data.size())
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
}

template <typename T>
void Tensor<T>::require_defined() const
{
    if (!impl_)
        throw GraphError("use of an undefined tensor");
}

template <typename T>
const Shape& Tensor<T>::shape() const
{
    require_defined();
    return impl_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const
{
    const auto& s = shape();
    if (axis >= s.size())
        throw ShapeError("axis out of range for shape " + shape_str(s));
    return s[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const
{
    return impl_ ? impl_->data.size() : 0;
}

template <typename T>
std::span<const T> Tensor<T>::data() const
{
    require_defined();
    return impl_->data;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data()
{
    require_defined();
    if (impl_->node)
        throw GraphError("in-place write to a non-leaf tensor");
    return impl_->data;
}

template <typename T>
T Tensor<T>::item() const
{
    if (numel() != 1)
        throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

template <typename T>
T Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const
{
    const auto& s = shape();
    if (s.size() != 4)
        throw ShapeError("at(n,c,h,w) needs a rank-4 tensor");
    return impl_->data[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

template <typename T>
bool Tensor<T>::requires_grad() const
{
    return impl_ && impl_->requires_grad;
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on)
{
    require_defined();
    if (impl_->node && !on)
        throw GraphError("cannot clear requires_grad on a non-leaf tensor");
    impl_->requires_grad = on;
    return *this;
}

template <typename T>
bool Tensor<T>::is_leaf() const
{
    return impl_ && !impl_->node;
}

template <typename T>
bool Tensor<T>::has_grad() const
{
    return impl_ && !impl_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const
{
    require_defined();
    return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad()
{
    require_defined();
    impl_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const
{
    require_defined();
    return Tensor<T>(impl_->shape, impl_->data);
}

template <typename T>
void Tensor<T>::backward()
{
    require_defined();
    if (impl_->data.size() != 1)
        throw GraphError("backward() requires a scalar, got shape " + shape_str(impl_->shape));
    if (!impl_->requires_grad)
        throw GraphError("backward() on a tensor that does not require grad");
    if (impl_->backward_done)
        throw GraphError("backward() called twice on the same graph");

    // Post-order DFS: every impl appears after all of its inputs.
    std::vector<TensorImpl<T>*> order;
    // Releasing a node's inputs may drop the last owner of a queued impl.
    std::vector<std::shared_ptr<TensorImpl<T>>> keep_alive;
    std::unordered_set<TensorImpl<T>*> visited;
    std::vector<std::pair<TensorImpl<T>*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    visited.insert(impl_.get());
    while (!stack.empty()) {
        auto& [cur, next] = stack.back();
        auto* node = cur->node.get();
        if (node && node->consumed)
            throw GraphError("graph already consumed by an earlier backward()");
        if (node && next < node->inputs.size()) {
            const auto& in = node->inputs[next++];
            if (in->requires_grad && visited.insert(in.get()).second) {
                keep_alive.push_back(in);
                stack.emplace_back(in.get(), 0);
            }
            continue;
        }
        order.push_back(cur);
        stack.pop_back();
    }

    impl_->grad.assign(1, T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* cur = *it;
        auto* node = cur->node.get();
        if (!node)
            continue;
        cur->grad_buffer();
        node->backward(*cur);
        node->backward = nullptr;
        node->inputs.clear();
        node->consumed = true;
        cur->grad.clear();
        cur->grad.shrink_to_fit();
    }
    impl_->backward_done = true;
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      std::initializer_list<Tensor<T>> inputs,
                      std::function<void(const TensorImpl<T>&)> backward)
{
    Tensor<T> out(std::move(shape), std::move(data));
    if (!GradMode::enabled())
        return out;
    bool track = false;
    for (const auto& in : inputs)
        track = track || in.requires_grad();
    if (!track)
        return out;
    auto node = std::make_shared<TapeNode<T>>();
    node->op = op;
    for (const auto& in : inputs)
        if (in.defined())
            node->inputs.push_back(in.impl());
    node->backward = std::move(backward);
    out.impl()->requires_grad = true;
    out.impl()->node = std::move(node);
    return out;
}

template class Tensor<float>;
template class Tensor<double>;

template Tensor<float> make_result(Shape, std::vector<float>, std::string_view,
                                   std::initializer_list<Tensor<float>>,
                                   std::function<void(const TensorImpl<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::string_view,
                                    std::initializer_list<Tensor<double>>,
                                    std::function<void(const TensorImpl<double>&)>);

} // namespace dsan
