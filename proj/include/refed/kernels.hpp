#ifndef REFED_KERNELS_HPP
#define REFED_KERNELS_HPP

#include <cblas.h>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "refed/tensor.hpp"

// Low-level numeric kernels. Two flavours live here:
//   kernels::par    - OpenMP / BLAS-backed implementations used by the layers
//   kernels::serial - plain-loop reference implementations kept for testing
//                     and for the kernel benchmark
// Parallel loops only ever split over independent output elements, so results
// do not depend on the thread schedule.

namespace refed::kernels {

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

struct ConvDims {
    std::size_t batch, c_in, c_out, t_len, k;
    std::size_t half() const { return k / 2; }
};

namespace serial {

// Direct triple-loop 1D convolution, stride 1, zero same-padding.
template <class T>
void conv1d_forward(const T* in, const T* w, const T* bias, T* out,
                    const ConvDims& d) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(d.half());
    const std::ptrdiff_t tl = static_cast<std::ptrdiff_t>(d.t_len);
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t co = 0; co < d.c_out; ++co)
            for (std::ptrdiff_t t = 0; t < tl; ++t) {
                T acc = bias[co];
                for (std::size_t ci = 0; ci < d.c_in; ++ci)
                    for (std::size_t j = 0; j < d.k; ++j) {
                        std::ptrdiff_t ti = t + static_cast<std::ptrdiff_t>(j) - h;
                        if (ti < 0 || ti >= tl) continue;
                        acc += in[(b * d.c_in + ci) * d.t_len + ti] *
                               w[(co * d.c_in + ci) * d.k + j];
                    }
                out[(b * d.c_out + co) * d.t_len + t] = acc;
            }
}

template <class T>
void linear_forward(const T* in, const T* w, const T* bias, T* out,
                    std::size_t batch, std::size_t n_in, std::size_t n_out) {
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < n_out; ++o) {
            T acc = bias[o];
            for (std::size_t i = 0; i < n_in; ++i)
                acc += in[b * n_in + i] * w[i * n_out + o];
            out[b * n_out + o] = acc;
        }
}

// Pairwise scaled dot products: g[i*n+j] = dot(z_i, z_j) / tau.
template <class T>
void gram(const T* z, std::size_t n, std::size_t dim, T tau, T* g) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            T acc = 0;
            for (std::size_t c = 0; c < dim; ++c)
                acc += z[i * dim + c] * z[j * dim + c];
            g[i * n + j] = acc / tau;
        }
}

} // namespace serial

namespace par {

// im2col: col is [c_in*k, batch*t_len]; zero padding outside the series.
template <class T>
void im2col(const T* in, T* col, const ConvDims& d) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(d.half());
    const std::ptrdiff_t tl = static_cast<std::ptrdiff_t>(d.t_len);
    const std::size_t cols = d.batch * d.t_len;
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t ci = 0; ci < d.c_in; ++ci)
        for (std::size_t j = 0; j < d.k; ++j) {
            T* dst = col + (ci * d.k + j) * cols;
            for (std::size_t b = 0; b < d.batch; ++b) {
                const T* src = in + (b * d.c_in + ci) * d.t_len;
                for (std::ptrdiff_t t = 0; t < tl; ++t) {
                    std::ptrdiff_t ti = t + static_cast<std::ptrdiff_t>(j) - h;
                    dst[b * d.t_len + t] =
                        (ti < 0 || ti >= tl) ? T(0) : src[ti];
                }
            }
        }
}

// Scatter-free col2im: gathers every dcol entry that maps to one input slot.
template <class T>
void col2im(const T* dcol, T* din, const ConvDims& d) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(d.half());
    const std::ptrdiff_t tl = static_cast<std::ptrdiff_t>(d.t_len);
    const std::size_t cols = d.batch * d.t_len;
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t ci = 0; ci < d.c_in; ++ci) {
            T* dst = din + (b * d.c_in + ci) * d.t_len;
            for (std::ptrdiff_t ti = 0; ti < tl; ++ti) {
                T acc = 0;
                for (std::size_t j = 0; j < d.k; ++j) {
                    std::ptrdiff_t t = ti - static_cast<std::ptrdiff_t>(j) + h;
                    if (t < 0 || t >= tl) continue;
                    acc += dcol[(ci * d.k + j) * cols + b * d.t_len + t];
                }
                dst[ti] = acc;
            }
        }
}

// out[b,co,t]; col scratch must hold c_in*k * batch*t_len entries.
template <class T>
void conv1d_forward(const T* in, const T* w, const T* bias, T* out,
                    const ConvDims& d, std::vector<T>& col) {
    const std::size_t cols = d.batch * d.t_len;
    col.resize(d.c_in * d.k * cols);
    im2col(in, col.data(), d);
    // out_mat [c_out, cols] = W [c_out, c_in*k] x col
    std::vector<T> out_mat(d.c_out * cols);
    gemm(false, false, static_cast<int>(d.c_out), static_cast<int>(cols),
         static_cast<int>(d.c_in * d.k), T(1), w,
         static_cast<int>(d.c_in * d.k), col.data(), static_cast<int>(cols),
         T(0), out_mat.data(), static_cast<int>(cols));
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t co = 0; co < d.c_out; ++co) {
            const T* src = out_mat.data() + co * cols + b * d.t_len;
            T* dst = out + (b * d.c_out + co) * d.t_len;
            for (std::size_t t = 0; t < d.t_len; ++t)
                dst[t] = src[t] + bias[co];
        }
}

// Accumulates dw/dbias; writes din (may be null when the input needs no grad).
// col must still hold the forward-pass im2col of the same input.
template <class T>
void conv1d_backward(const T* w, const T* dout, const std::vector<T>& col,
                     T* din, T* dw, T* dbias, const ConvDims& d) {
    const std::size_t cols = d.batch * d.t_len;
    // Regroup dout [b,co,t] into dout_mat [c_out, batch*t_len].
    std::vector<T> dout_mat(d.c_out * cols);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t co = 0; co < d.c_out; ++co) {
            const T* src = dout + (b * d.c_out + co) * d.t_len;
            T* dst = dout_mat.data() + co * cols + b * d.t_len;
            for (std::size_t t = 0; t < d.t_len; ++t) dst[t] = src[t];
        }
#pragma omp parallel for schedule(static)
    for (std::size_t co = 0; co < d.c_out; ++co) {
        const T* src = dout_mat.data() + co * cols;
        T acc = 0;
        for (std::size_t i = 0; i < cols; ++i) acc += src[i];
        dbias[co] += acc;
    }
    // dW += dout_mat x col^T
    gemm(false, true, static_cast<int>(d.c_out),
         static_cast<int>(d.c_in * d.k), static_cast<int>(cols), T(1),
         dout_mat.data(), static_cast<int>(cols), col.data(),
         static_cast<int>(cols), T(1), dw, static_cast<int>(d.c_in * d.k));
    if (din) {
        std::vector<T> dcol(d.c_in * d.k * cols);
        // dcol = W^T x dout_mat
        gemm(true, false, static_cast<int>(d.c_in * d.k),
             static_cast<int>(cols), static_cast<int>(d.c_out), T(1), w,
             static_cast<int>(d.c_in * d.k), dout_mat.data(),
             static_cast<int>(cols), T(0), dcol.data(),
             static_cast<int>(cols));
        col2im(dcol.data(), din, d);
    }
}

// in [batch, n_in] row-major, w [n_in, n_out], out [batch, n_out].
template <class T>
void linear_forward(const T* in, const T* w, const T* bias, T* out,
                    std::size_t batch, std::size_t n_in, std::size_t n_out) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < n_out; ++o) out[b * n_out + o] = bias[o];
    gemm(false, false, static_cast<int>(batch), static_cast<int>(n_out),
         static_cast<int>(n_in), T(1), in, static_cast<int>(n_in), w,
         static_cast<int>(n_out), T(1), out, static_cast<int>(n_out));
}

template <class T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw,
                     T* dbias, std::size_t batch, std::size_t n_in,
                     std::size_t n_out) {
#pragma omp parallel for schedule(static)
    for (std::size_t o = 0; o < n_out; ++o) {
        T acc = 0;
        for (std::size_t b = 0; b < batch; ++b) acc += dout[b * n_out + o];
        dbias[o] += acc;
    }
    // dW += in^T x dout
    gemm(true, false, static_cast<int>(n_in), static_cast<int>(n_out),
         static_cast<int>(batch), T(1), in, static_cast<int>(n_in), dout,
         static_cast<int>(n_out), T(1), dw, static_cast<int>(n_out));
    if (din)
        gemm(false, true, static_cast<int>(batch), static_cast<int>(n_in),
             static_cast<int>(n_out), T(1), dout, static_cast<int>(n_out), w,
             static_cast<int>(n_out), T(0), din, static_cast<int>(n_in));
}

template <class T>
void gram(const T* z, std::size_t n, std::size_t dim, T tau, T* g) {
    gemm(false, true, static_cast<int>(n), static_cast<int>(n),
         static_cast<int>(dim), T(1) / tau, z, static_cast<int>(dim), z,
         static_cast<int>(dim), T(0), g, static_cast<int>(n));
}

} // namespace par

// ---- Batch normalization over the (batch, time) axes, per channel. ----

template <class T>
struct BatchNormCache {
    std::vector<T> mean, inv_std; // per channel, batch statistics
    Tensor<T> x_hat;              // normalized input
};

// x, out: [batch, c, t]. Train mode updates running stats in place.
template <class T>
void batchnorm_forward(const T* x, T* out, std::size_t batch, std::size_t c,
                       std::size_t t, const T* gamma, const T* beta,
                       T* running_mean, T* running_var, bool train, T momentum,
                       T eps, BatchNormCache<T>* cache) {
    const std::size_t m = batch * t;
    if (train && m < 2)
        throw std::invalid_argument("batchnorm: train mode needs batch*time >= 2");
    if (cache) {
        cache->mean.assign(c, T(0));
        cache->inv_std.assign(c, T(0));
        cache->x_hat = Tensor<T>({batch, c, t});
    }
#pragma omp parallel for schedule(static)
    for (std::size_t ch = 0; ch < c; ++ch) {
        T mean, inv_std;
        if (train) {
            T s = 0;
            for (std::size_t b = 0; b < batch; ++b) {
                const T* src = x + (b * c + ch) * t;
                for (std::size_t i = 0; i < t; ++i) s += src[i];
            }
            mean = s / static_cast<T>(m);
            T sq = 0;
            for (std::size_t b = 0; b < batch; ++b) {
                const T* src = x + (b * c + ch) * t;
                for (std::size_t i = 0; i < t; ++i) {
                    T d = src[i] - mean;
                    sq += d * d;
                }
            }
            T var = sq / static_cast<T>(m);
            running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mean;
            running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * var;
            inv_std = T(1) / std::sqrt(var + eps);
        } else {
            mean = running_mean[ch];
            inv_std = T(1) / std::sqrt(running_var[ch] + eps);
        }
        for (std::size_t b = 0; b < batch; ++b) {
            const T* src = x + (b * c + ch) * t;
            T* dst = out + (b * c + ch) * t;
            T* xh = cache ? cache->x_hat.data() + (b * c + ch) * t : nullptr;
            for (std::size_t i = 0; i < t; ++i) {
                T h = (src[i] - mean) * inv_std;
                if (xh) xh[i] = h;
                dst[i] = gamma[ch] * h + beta[ch];
            }
        }
        if (cache) {
            cache->mean[ch] = mean;
            cache->inv_std[ch] = inv_std;
        }
    }
}

// Train-mode backward through the batch statistics. Accumulates dgamma/dbeta.
template <class T>
void batchnorm_backward(const T* dout, const BatchNormCache<T>& cache,
                        std::size_t batch, std::size_t c, std::size_t t,
                        const T* gamma, T* din, T* dgamma, T* dbeta) {
    const T m = static_cast<T>(batch * t);
#pragma omp parallel for schedule(static)
    for (std::size_t ch = 0; ch < c; ++ch) {
        T sum_dy = 0, sum_dy_xhat = 0;
        for (std::size_t b = 0; b < batch; ++b) {
            const T* dy = dout + (b * c + ch) * t;
            const T* xh = cache.x_hat.data() + (b * c + ch) * t;
            for (std::size_t i = 0; i < t; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xh[i];
            }
        }
        dbeta[ch] += sum_dy;
        dgamma[ch] += sum_dy_xhat;
        const T g = gamma[ch] * cache.inv_std[ch];
        for (std::size_t b = 0; b < batch; ++b) {
            const T* dy = dout + (b * c + ch) * t;
            const T* xh = cache.x_hat.data() + (b * c + ch) * t;
            T* dx = din + (b * c + ch) * t;
            for (std::size_t i = 0; i < t; ++i)
                dx[i] = g * (dy[i] - sum_dy / m - xh[i] * sum_dy_xhat / m);
        }
    }
}

// ---- Softmax cross-entropy (mean over the batch). ----

template <class T>
struct XentResult {
    T loss;
    Tensor<T> dlogits; // (softmax - onehot) / batch
};

template <class T>
XentResult<T> softmax_xent(const Tensor<T>& logits,
                           const std::vector<int>& labels) {
    const std::size_t batch = logits.dim(0), m = logits.dim(1);
    if (labels.size() != batch)
        throw std::invalid_argument("softmax_xent: label count mismatch");
    XentResult<T> r;
    r.dlogits = Tensor<T>({batch, m});
    T total = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        const T* row = logits.data() + b * m;
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= m)
            throw std::out_of_range("softmax_xent: label out of range");
        T mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        T denom = 0;
        for (std::size_t j = 0; j < m; ++j) denom += std::exp(row[j] - mx);
        const T lse = mx + std::log(denom);
        total += lse - row[labels[b]];
        T* dst = r.dlogits.data() + b * m;
        for (std::size_t j = 0; j < m; ++j)
            dst[j] = std::exp(row[j] - mx) / denom / static_cast<T>(batch);
        dst[labels[b]] -= T(1) / static_cast<T>(batch);
    }
    r.loss = total / static_cast<T>(batch);
    return r;
}

template <class T>
void softmax_rows(const Tensor<T>& logits, Tensor<T>& probs) {
    const std::size_t batch = logits.dim(0), m = logits.dim(1);
    probs = Tensor<T>({batch, m});
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < batch; ++b) {
        const T* row = logits.data() + b * m;
        T* dst = probs.data() + b * m;
        T mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        T denom = 0;
        for (std::size_t j = 0; j < m; ++j) {
            dst[j] = std::exp(row[j] - mx);
            denom += dst[j];
        }
        for (std::size_t j = 0; j < m; ++j) dst[j] /= denom;
    }
}

} // namespace refed::kernels

#endif
