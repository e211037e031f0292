#ifndef REFED_NN_HPP
#define REFED_NN_HPP

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "refed/kernels.hpp"
#include "refed/tensor.hpp"

namespace refed {

enum class Mode { Train, Eval };

/// One named trainable tensor with its gradient buffer.
template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    void init_shape(std::string n, std::vector<std::size_t> shape) {
        name = std::move(n);
        value = Tensor<T>(shape);
        grad = Tensor<T>(std::move(shape));
    }
};

template <class T>
void zero_grads(const std::vector<Param<T>*>& params) {
    for (auto* p : params) p->grad.fill(T(0));
}

/// Named persistent tensors of a model: parameters plus running statistics.
template <class T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>*>>;

/// Glorot-uniform weight init: U(+-sqrt(6/(fan_in+fan_out))).
template <class T>
void glorot_init(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out,
                 std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : w.v) x = static_cast<T>(dist(rng));
}

template <class T>
struct Conv1dLayer {
    std::size_t c_in = 0, c_out = 0, k = 5;
    Param<T> w, bias;
    Tensor<T> in_cache;
    std::vector<T> col_cache;

    void init(const std::string& prefix, std::size_t ci, std::size_t co,
              std::size_t kk, std::mt19937_64& rng) {
        c_in = ci;
        c_out = co;
        k = kk;
        if (k % 2 == 0) throw std::invalid_argument("conv1d: kernel size must be odd");
        w.init_shape(prefix + ".weight", {co, ci, k});
        bias.init_shape(prefix + ".bias", {co});
        glorot_init(w.value, ci * k, co * k, rng);
    }

    // x: [B, c_in, T] -> [B, c_out, T]
    Tensor<T> forward(const Tensor<T>& x) {
        if (x.dim(1) != c_in) throw std::invalid_argument("conv1d: channel mismatch");
        in_cache = x;
        const kernels::ConvDims d{x.dim(0), c_in, c_out, x.dim(2), k};
        Tensor<T> out({x.dim(0), c_out, x.dim(2)});
        kernels::par::conv1d_forward(x.data(), w.value.data(), bias.value.data(),
                                     out.data(), d, col_cache);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout, bool need_dx = true) {
        const kernels::ConvDims d{in_cache.dim(0), c_in, c_out, in_cache.dim(2), k};
        Tensor<T> din;
        if (need_dx) din = Tensor<T>({d.batch, c_in, d.t_len});
        kernels::par::conv1d_backward(w.value.data(), dout.data(), col_cache,
                                      need_dx ? din.data() : nullptr,
                                      w.grad.data(), bias.grad.data(), d);
        return din;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w);
        out.push_back(&bias);
    }

    void collect_state(NamedTensors<T>& out) {
        out.push_back({w.name, &w.value});
        out.push_back({bias.name, &bias.value});
    }
};

template <class T>
struct BatchNorm1dLayer {
    std::size_t c = 0;
    T eps = T(1e-5), momentum = T(0.1);
    std::string name_prefix;
    Param<T> gamma, beta;
    Tensor<T> running_mean, running_var;
    kernels::BatchNormCache<T> cache;

    void init(const std::string& prefix, std::size_t channels) {
        c = channels;
        name_prefix = prefix;
        gamma.init_shape(prefix + ".gamma", {c});
        beta.init_shape(prefix + ".beta", {c});
        gamma.value.fill(T(1));
        running_mean = Tensor<T>({c});
        running_var = Tensor<T>({c});
        running_var.fill(T(1));
    }

    // x: [B, c, T]
    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        Tensor<T> out(x.shape);
        kernels::batchnorm_forward(x.data(), out.data(), x.dim(0), c, x.dim(2),
                                   gamma.value.data(), beta.value.data(),
                                   running_mean.data(), running_var.data(),
                                   mode == Mode::Train, momentum, eps,
                                   mode == Mode::Train ? &cache : nullptr);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) {
        Tensor<T> din(dout.shape);
        kernels::batchnorm_backward(dout.data(), cache, dout.dim(0), c,
                                    dout.dim(2), gamma.value.data(), din.data(),
                                    gamma.grad.data(), beta.grad.data());
        return din;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }

    void collect_state(NamedTensors<T>& out) {
        out.push_back({gamma.name, &gamma.value});
        out.push_back({beta.name, &beta.value});
        out.push_back({name_prefix + ".running_mean", &running_mean});
        out.push_back({name_prefix + ".running_var", &running_var});
    }
};

template <class T>
struct ReluLayer {
    Tensor<T> out_cache;

    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> out(x.shape);
        const std::size_t n = x.size();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i)
            out[i] = x[i] > T(0) ? x[i] : T(0);
        out_cache = out;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) {
        Tensor<T> din(dout.shape);
        const std::size_t n = dout.size();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i)
            din[i] = out_cache[i] > T(0) ? dout[i] : T(0);
        return din;
    }
};

/// Inverted dropout: kept units scaled by 1/(1-rate); Eval mode is identity.
template <class T>
struct DropoutLayer {
    T rate = T(0.5);
    std::vector<uint8_t> mask;

    Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64& rng) {
        if (mode == Mode::Eval || rate == T(0)) {
            mask.clear();
            return x;
        }
        Tensor<T> out(x.shape);
        mask.resize(x.size());
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        const T scale = T(1) / (T(1) - rate);
        for (std::size_t i = 0; i < x.size(); ++i) {
            mask[i] = dist(rng) >= static_cast<double>(rate);
            out[i] = mask[i] ? x[i] * scale : T(0);
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) {
        if (mask.empty()) return dout;
        Tensor<T> din(dout.shape);
        const T scale = T(1) / (T(1) - rate);
        const std::size_t n = dout.size();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i)
            din[i] = mask[i] ? dout[i] * scale : T(0);
        return din;
    }
};

template <class T>
struct LinearLayer {
    std::size_t n_in = 0, n_out = 0;
    Param<T> w, bias; // w is [n_in, n_out]
    Tensor<T> in_cache;

    void init(const std::string& prefix, std::size_t ni, std::size_t no,
              std::mt19937_64& rng) {
        n_in = ni;
        n_out = no;
        w.init_shape(prefix + ".weight", {ni, no});
        bias.init_shape(prefix + ".bias", {no});
        glorot_init(w.value, ni, no, rng);
    }

    // x: [B, n_in] -> [B, n_out]
    Tensor<T> forward(const Tensor<T>& x) {
        if (x.dim(1) != n_in) throw std::invalid_argument("linear: width mismatch");
        in_cache = x;
        Tensor<T> out({x.dim(0), n_out});
        kernels::par::linear_forward(x.data(), w.value.data(), bias.value.data(),
                                     out.data(), x.dim(0), n_in, n_out);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout, bool need_dx = true) {
        Tensor<T> din;
        if (need_dx) din = Tensor<T>({in_cache.dim(0), n_in});
        kernels::par::linear_backward(in_cache.data(), w.value.data(),
                                      dout.data(), need_dx ? din.data() : nullptr,
                                      w.grad.data(), bias.grad.data(),
                                      in_cache.dim(0), n_in, n_out);
        return din;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w);
        out.push_back(&bias);
    }

    void collect_state(NamedTensors<T>& out) {
        out.push_back({w.name, &w.value});
        out.push_back({bias.name, &bias.value});
    }
};

} // namespace refed

#endif
