#pragma once

#include <cmath>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vagcn/tensor.hpp"

namespace vagcn {

/// Cosine annealing from lr0 at t=0 down to 0 at t=T.
inline double cosine_lr(size_t t, size_t total, double lr0) {
    if (total == 0) throw ValueError("cosine_lr: total step count is zero");
    return lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(t) /
                                       static_cast<double>(total)));
}

template <class T>
struct AdamConfig {
    T lr0 = T(0.001);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    T weight_decay = T(1e-4);
};

template <class T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    std::span<const T> grad;
};

// Adam with decoupled weight decay. Moment accumulators are keyed by
// parameter name and allocated to the parameter's shape on first use; the
// step counter advances once per adam_step call.
template <class T>
struct OptimizerState {
    AdamConfig<T> cfg;
    size_t t = 0;
    size_t total_steps = 0;
    std::unordered_map<std::string, std::pair<std::vector<T>, std::vector<T>>> moments;
};

template <class T>
void adam_step(OptimizerState<T>& st, std::span<ParamRef<T>> params, T lr) {
    for (const auto& p : params)
        for (const T g : p.grad)
            if (!std::isfinite(static_cast<double>(g)))
                throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
    st.t += 1;
    const T b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const T bc1 = T(1) - std::pow(b1, static_cast<T>(st.t));
    const T bc2 = T(1) - std::pow(b2, static_cast<T>(st.t));
    for (auto& p : params) {
        auto& [m, v] = st.moments[p.name];
        const size_t n = p.value->size();
        if (m.size() != n) {
            m.assign(n, T(0));
            v.assign(n, T(0));
        }
        if (p.grad.size() != n)
            throw ShapeError("adam_step: gradient size mismatch for parameter '" + p.name + "'");
        T* w = p.value->data();
        const T* g = p.grad.data();
        // Decoupled weight decay precedes the moment update.
        if (st.cfg.weight_decay != T(0))
            for (size_t i = 0; i < n; ++i) w[i] -= lr * st.cfg.weight_decay * w[i];
        for (size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            const T mh = m[i] / bc1;
            const T vh = v[i] / bc2;
            w[i] -= lr * mh / (std::sqrt(vh) + st.cfg.eps);
        }
    }
}

}  // namespace vagcn
