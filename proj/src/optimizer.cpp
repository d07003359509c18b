// SPDX-License-Identifier: Apache-2.0
#include "dsan/optimizer.hpp"

#include "dsan/error.hpp"

#include <cmath>
#include <numbers>

namespace dsan {

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0, double lr_min)
{
    if (total_steps == 0)
        throw ConfigError("cosine_lr: total steps must be positive");
    if (step > total_steps)
        throw ConfigError("cosine_lr: step " + std::to_string(step) + " beyond schedule of " +
                          std::to_string(total_steps));
    const double phase = std::numbers::pi * static_cast<double>(step) /
                         static_cast<double>(total_steps);
    const double f = 0.5 * (1.0 + std::cos(phase));
    return lr0 * f + lr_min * (1.0 - f);
}

template <typename T>
AdamState<T> AdamState<T>::fresh(std::span<const NamedParameter<T>> params, AdamOptions options)
{
    AdamState<T> s;
    s.options = options;
    for (const auto& p : params) {
        s.m.emplace_back(p.tensor.numel(), T(0));
        s.v.emplace_back(p.tensor.numel(), T(0));
    }
    return s;
}

template <typename T>
double adam_step(std::span<NamedParameter<T>> params, AdamState<T>& state)
{
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw GraphError("adam_step: optimizer state does not match the parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = params[i].tensor;
        if (!t.has_grad())
            throw GraphError("adam_step: parameter '" + params[i].name + "' has no gradient");
        if (state.m[i].size() != t.numel())
            throw GraphError("adam_step: moment size mismatch for '" + params[i].name + "'");
        for (T g : t.grad())
            if (!std::isfinite(g))
                throw NumericalError("adam_step: non-finite gradient in '" + params[i].name + "'");
    }

    const auto& o = state.options;
    const double lr = cosine_lr(state.step, o.total_steps, o.lr0, o.lr_min);
    const double t = static_cast<double>(state.step + 1);
    const T b1 = static_cast<T>(o.beta1);
    const T b2 = static_cast<T>(o.beta2);
    const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(o.beta1, t)));
    const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(o.beta2, t)));
    const T eps = static_cast<T>(o.eps);
    const T step_size = static_cast<T>(lr);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].tensor.mutable_data();
        auto g = params[i].tensor.grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            const T m_hat = m[j] * c1;
            const T v_hat = v[j] * c2;
            p[j] -= step_size * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
    ++state.step;
    return lr;
}

template struct AdamState<float>;
template struct AdamState<double>;
template double adam_step(std::span<NamedParameter<float>>, AdamState<float>&);
template double adam_step(std::span<NamedParameter<double>>, AdamState<double>&);

} // namespace dsan
