#ifndef REFED_TEMPCNN_HPP
#define REFED_TEMPCNN_HPP

#include <string>
#include <vector>

#include "refed/nn.hpp"

namespace refed {

// TempCNN building blocks. The encoder stacks three conv blocks
// (conv1d k=5 -> batchnorm -> ReLU -> dropout) with 64 channels each and
// flattens to D = 64*T. Two feature taps are exposed: z0 (second block's
// activations) and z1 (the encoder output). The classifier is a 256-unit
// hidden layer (linear -> batchnorm -> ReLU -> dropout) plus a linear output
// layer; its post-ReLU hidden activation is the z2 tap.

template <class T>
struct ConvBlock {
    Conv1dLayer<T> conv;
    BatchNorm1dLayer<T> bn;
    ReluLayer<T> relu;
    DropoutLayer<T> drop;

    void init(const std::string& prefix, std::size_t c_in, std::size_t c_out,
              T dropout_rate, std::mt19937_64& rng) {
        conv.init(prefix + ".conv", c_in, c_out, 5, rng);
        bn.init(prefix + ".bn", c_out);
        drop.rate = dropout_rate;
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64& rng) {
        return drop.forward(relu.forward(bn.forward(conv.forward(x), mode)), mode, rng);
    }

    Tensor<T> backward(const Tensor<T>& dout, bool need_dx = true) {
        return conv.backward(bn.backward(relu.backward(drop.backward(dout))), need_dx);
    }

    void collect(std::vector<Param<T>*>& out) {
        conv.collect(out);
        bn.collect(out);
    }

    void collect_state(NamedTensors<T>& out) {
        conv.collect_state(out);
        bn.collect_state(out);
    }
};

template <class T>
struct Encoder {
    std::size_t t_len = 0, c_in = 0, channels = 64;
    ConvBlock<T> b1, b2, b3;
    Tensor<T> post_b2_cache; // shape bookkeeping for the z0 tap

    std::size_t feature_dim() const { return channels * t_len; }

    void init(const std::string& prefix, std::size_t t, std::size_t c,
              T dropout_rate, std::mt19937_64& rng) {
        t_len = t;
        c_in = c;
        b1.init(prefix + ".block1", c, channels, dropout_rate, rng);
        b2.init(prefix + ".block2", channels, channels, dropout_rate, rng);
        b3.init(prefix + ".block3", channels, channels, dropout_rate, rng);
    }

    struct Taps {
        Tensor<T> z0, z1; // both [B, 64*T]
    };

    // x: [B, T, C]
    Taps forward(const Tensor<T>& x, Mode mode, std::mt19937_64& rng) {
        if (x.dim(1) != t_len || x.dim(2) != c_in)
            throw std::invalid_argument("encoder: input T or C mismatch");
        const std::size_t batch = x.dim(0);
        // transpose [B, T, C] -> [B, C, T]
        Tensor<T> xt({batch, c_in, t_len});
#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < t_len; ++t)
                for (std::size_t c = 0; c < c_in; ++c)
                    xt[(b * c_in + c) * t_len + t] = x[(b * t_len + t) * c_in + c];
        Tensor<T> h = b1.forward(xt, mode, rng);
        h = b2.forward(h, mode, rng);
        Taps taps;
        taps.z0 = h;
        taps.z0.reshape({batch, feature_dim()});
        post_b2_cache = h;
        h = b3.forward(h, mode, rng);
        h.reshape({batch, feature_dim()});
        taps.z1 = std::move(h);
        return taps;
    }

    // Joint backward from both taps; parameter grads accumulate in place.
    void backward(const Tensor<T>& dz1, const Tensor<T>* dz0 = nullptr) {
        const std::size_t batch = dz1.dim(0);
        Tensor<T> d = dz1;
        d.reshape({batch, channels, t_len});
        Tensor<T> d2 = b3.backward(d);
        if (dz0) {
            for (std::size_t i = 0; i < d2.size(); ++i) d2[i] += (*dz0)[i];
        }
        b1.backward(b2.backward(d2), /*need_dx=*/false);
    }

    void collect(std::vector<Param<T>*>& out) {
        b1.collect(out);
        b2.collect(out);
        b3.collect(out);
    }

    void collect_state(NamedTensors<T>& out) {
        b1.collect_state(out);
        b2.collect_state(out);
        b3.collect_state(out);
    }
};

template <class T>
struct Classifier {
    std::size_t d_in = 0, hidden = 256, n_out = 0;
    LinearLayer<T> fc, head;
    BatchNorm1dLayer<T> bn;
    ReluLayer<T> relu;
    DropoutLayer<T> drop;

    void init(const std::string& prefix, std::size_t d, std::size_t m,
              T dropout_rate, std::mt19937_64& rng) {
        d_in = d;
        n_out = m;
        fc.init(prefix + ".fc", d, hidden, rng);
        bn.init(prefix + ".bn", hidden);
        head.init(prefix + ".head", hidden, m, rng);
        drop.rate = dropout_rate;
    }

    struct Out {
        Tensor<T> hidden; // z2 tap: post-ReLU activation, [B, 256]
        Tensor<T> logits; // pre-softmax, [B, M]
    };

    // z1: [B, D]
    Out forward(const Tensor<T>& z1, Mode mode, std::mt19937_64& rng) {
        const std::size_t batch = z1.dim(0);
        Tensor<T> h = fc.forward(z1);
        h.reshape({batch, hidden, 1});
        h = bn.forward(h, mode);
        h.reshape({batch, hidden});
        h = relu.forward(h);
        Out out;
        out.hidden = h;
        h = drop.forward(h, mode, rng);
        out.logits = head.forward(h);
        return out;
    }

    // Returns d(z1). dhidden, when given, is the gradient arriving at the
    // z2 tap (in addition to the logits path).
    Tensor<T> backward(const Tensor<T>& dlogits, const Tensor<T>* dhidden = nullptr) {
        const std::size_t batch = dlogits.dim(0);
        Tensor<T> d = drop.backward(head.backward(dlogits));
        if (dhidden) {
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += (*dhidden)[i];
        }
        d = relu.backward(d);
        d.reshape({batch, hidden, 1});
        d = bn.backward(d);
        d.reshape({batch, hidden});
        return fc.backward(d);
    }

    void collect(std::vector<Param<T>*>& out) {
        fc.collect(out);
        bn.collect(out);
        head.collect(out);
    }

    void collect_state(NamedTensors<T>& out) {
        fc.collect_state(out);
        bn.collect_state(out);
        head.collect_state(out);
    }
};

/// Plain TempCNN (one encoder + task classifier) used by the baselines.
template <class T>
struct TempCnnModel {
    Encoder<T> enc;
    Classifier<T> cls;
    std::mt19937_64 dropout_rng{0};

    void init(std::size_t t_len, std::size_t c_in, std::size_t n_classes,
              T dropout_rate, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        enc.init("encoder", t_len, c_in, dropout_rate, rng);
        cls.init("classifier", enc.feature_dim(), n_classes, dropout_rate, rng);
        dropout_rng.seed(seed ^ 0x9e3779b97f4a7c15ULL);
    }

    std::vector<Param<T>*> parameters() {
        std::vector<Param<T>*> out;
        enc.collect(out);
        cls.collect(out);
        return out;
    }

    Tensor<T> logits(const Tensor<T>& x, Mode mode) {
        auto taps = enc.forward(x, mode, dropout_rng);
        return cls.forward(taps.z1, mode, dropout_rng).logits;
    }

    NamedTensors<T> state() {
        NamedTensors<T> out;
        enc.collect_state(out);
        cls.collect_state(out);
        return out;
    }
};

} // namespace refed

#endif
