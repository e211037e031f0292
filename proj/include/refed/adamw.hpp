#ifndef REFED_ADAMW_HPP
#define REFED_ADAMW_HPP

#include <cmath>
#include <vector>

#include "refed/nn.hpp"

namespace refed {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay: the decay term is applied directly to
/// the parameter, outside the moment update.
template <class T>
struct AdamW {
    AdamWConfig cfg;
    std::vector<Tensor<T>> m, v;
    std::uint64_t step_count = 0;

    explicit AdamW(const std::vector<Param<T>*>& params, AdamWConfig c = {})
        : cfg(c) {
        reset(params);
    }

    void reset(const std::vector<Param<T>*>& params) {
        m.clear();
        v.clear();
        step_count = 0;
        for (auto* p : params) {
            m.emplace_back(p->value.shape);
            v.emplace_back(p->value.shape);
        }
    }

    void step(const std::vector<Param<T>*>& params) {
        ++step_count;
        const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
        const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(step_count)));
        const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(step_count)));
        const T lr = static_cast<T>(cfg.lr), wd = static_cast<T>(cfg.weight_decay);
        const T eps = static_cast<T>(cfg.eps);
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            T* p = params[pi]->value.data();
            const T* g = params[pi]->grad.data();
            T* mm = m[pi].data();
            T* vv = v[pi].data();
            const std::size_t n = params[pi]->value.size();
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < n; ++i) {
                mm[i] = b1 * mm[i] + (T(1) - b1) * g[i];
                vv[i] = b2 * vv[i] + (T(1) - b2) * g[i] * g[i];
                const T m_hat = mm[i] / bc1;
                const T v_hat = vv[i] / bc2;
                p[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * p[i]);
            }
        }
    }
};

} // namespace refed

#endif
