#pragma once

#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "vagcn/ops.hpp"
#include "vagcn/rng.hpp"
#include "vagcn/tensor.hpp"

namespace vagcn {

// Central finite-difference check of reverse-mode gradients, always in f64.
// The function under test receives tape-bound copies of the inputs and must
// return a scalar deterministically (verified by comparing two forward runs
// bitwise).

using GradFn =
    std::function<Tensor<double>(Tape<double>&, const std::vector<Tensor<double>>&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t worst_input = 0;
    size_t worst_element = 0;
};

namespace detail {
inline double gradcheck_eval(const GradFn& f, const std::vector<Tensor<double>>& inputs) {
    Tape<double> tape;
    std::vector<Tensor<double>> bound;
    bound.reserve(inputs.size());
    for (const auto& in : inputs) bound.push_back(tape.leaf(in));
    Tensor<double> out = f(tape, bound);
    return out.item();
}
}  // namespace detail

inline GradCheckReport grad_check(const GradFn& f, std::vector<Tensor<double>> inputs,
                                  double eps = 1e-6) {
    // Determinism gate: two forward runs must agree bitwise.
    const double v1 = detail::gradcheck_eval(f, inputs);
    const double v2 = detail::gradcheck_eval(f, inputs);
    if (std::memcmp(&v1, &v2, sizeof(double)) != 0)
        throw NumericError("grad_check: function is not deterministic");

    // Analytic pass.
    Tape<double> tape;
    std::vector<Tensor<double>> bound;
    bound.reserve(inputs.size());
    for (const auto& in : inputs) bound.push_back(tape.leaf(in));
    Tensor<double> loss = f(tape, bound);
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const auto& b : bound) {
        auto g = tape.grad(b);
        analytic.emplace_back(g.begin(), g.end());
    }

    GradCheckReport rep;
    for (size_t i = 0; i < inputs.size(); ++i) {
        Tensor<double>& x = inputs[i];
        for (size_t e = 0; e < x.size(); ++e) {
            const double saved = x[e];
            x[e] = saved + eps;
            const double fp = detail::gradcheck_eval(f, inputs);
            x[e] = saved - eps;
            const double fm = detail::gradcheck_eval(f, inputs);
            x[e] = saved;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[i][e];
            const double rel =
                std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_input = i;
                rep.worst_element = e;
            }
        }
    }
    return rep;
}

/// Reduces a tensor-valued function to a scalar through a fixed random
/// projection, so grad_check exercises every output element.
inline Tensor<double> scalarize(const Tensor<double>& t, uint64_t seed = 0x5eedULL) {
    Rng rng(seed);
    Tensor<double> w(t.shape());
    for (size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(0.5, 1.5);
    return sum_all(mul(t, w));
}

}  // namespace vagcn
