#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "refed/adamw.hpp"
#include "refed/gradcheck.hpp"
#include "refed/gradsuite.hpp"
#include "refed/kernels.hpp"
#include "refed/nn.hpp"

using namespace refed;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return v;
}

} // namespace

TEST_CASE("parallel conv1d matches the serial reference") {
    std::mt19937_64 rng(1);
    for (int it = 0; it < 10; ++it) {
        std::uniform_int_distribution<std::size_t> b_d(1, 5), c_d(1, 7), t_d(5, 16);
        const kernels::ConvDims d{b_d(rng), c_d(rng), c_d(rng), t_d(rng), 5};
        const auto in = random_vec<double>(d.batch * d.c_in * d.t_len, rng);
        const auto w = random_vec<double>(d.c_out * d.c_in * d.k, rng);
        const auto bias = random_vec<double>(d.c_out, rng);
        std::vector<double> out_s(d.batch * d.c_out * d.t_len), out_p(out_s.size());
        std::vector<double> col;
        kernels::serial::conv1d_forward(in.data(), w.data(), bias.data(),
                                        out_s.data(), d);
        kernels::par::conv1d_forward(in.data(), w.data(), bias.data(),
                                     out_p.data(), d, col);
        for (std::size_t i = 0; i < out_s.size(); ++i)
            CHECK(out_p[i] == doctest::Approx(out_s[i]).epsilon(1e-12));
    }
}

TEST_CASE("zero same-padding at the series borders") {
    // single-channel impulse kernel shifted by one step
    const kernels::ConvDims d{1, 1, 1, 4, 5};
    std::vector<double> in{1.0, 2.0, 3.0, 4.0};
    std::vector<double> w(5, 0.0), bias{0.0}, out(4), col;
    w[1] = 1.0; // taps t-1
    kernels::par::conv1d_forward(in.data(), w.data(), bias.data(), out.data(),
                                 d, col);
    CHECK(out[0] == 0.0); // padding, not wrap-around
    CHECK(out[1] == 1.0);
    CHECK(out[2] == 2.0);
    CHECK(out[3] == 3.0);
}

TEST_CASE("parallel linear matches the serial reference") {
    std::mt19937_64 rng(2);
    const std::size_t batch = 7, n_in = 13, n_out = 5;
    const auto in = random_vec<double>(batch * n_in, rng);
    const auto w = random_vec<double>(n_in * n_out, rng);
    const auto bias = random_vec<double>(n_out, rng);
    std::vector<double> out_s(batch * n_out), out_p(out_s.size());
    kernels::serial::linear_forward(in.data(), w.data(), bias.data(),
                                    out_s.data(), batch, n_in, n_out);
    kernels::par::linear_forward(in.data(), w.data(), bias.data(), out_p.data(),
                                 batch, n_in, n_out);
    for (std::size_t i = 0; i < out_s.size(); ++i)
        CHECK(out_p[i] == doctest::Approx(out_s[i]).epsilon(1e-12));
}

TEST_CASE("parallel gram matches the serial reference") {
    std::mt19937_64 rng(3);
    const std::size_t n = 9, dim = 6;
    const double tau = 0.07;
    const auto z = random_vec<double>(n * dim, rng);
    std::vector<double> g_s(n * n), g_p(n * n);
    kernels::serial::gram(z.data(), n, dim, tau, g_s.data());
    kernels::par::gram(z.data(), n, dim, tau, g_p.data());
    for (std::size_t i = 0; i < g_s.size(); ++i)
        CHECK(g_p[i] == doctest::Approx(g_s[i]).epsilon(1e-12));
}

TEST_CASE("batchnorm normalizes to zero mean unit variance in train mode") {
    std::mt19937_64 rng(4);
    BatchNorm1dLayer<double> bn;
    bn.init("bn", 3);
    Tensor<double> x({8, 3, 4});
    std::uniform_real_distribution<double> dist(2.0, 9.0);
    for (auto& v : x.v) v = dist(rng);
    const auto out = bn.forward(x, Mode::Train);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        double mean = 0, var = 0;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t t = 0; t < 4; ++t)
                mean += out[(b * 3 + ch) * 4 + t];
        mean /= 32.0;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t t = 0; t < 4; ++t) {
                const double d = out[(b * 3 + ch) * 4 + t] - mean;
                var += d * d;
            }
        var /= 32.0;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3)); // eps=1e-5 shrinks it
    }
}

TEST_CASE("batchnorm running statistics follow the momentum rule") {
    BatchNorm1dLayer<double> bn;
    bn.init("bn", 1);
    Tensor<double> x({2, 1, 2});
    x.v = {1.0, 3.0, 5.0, 7.0}; // mean 4, var 5
    bn.forward(x, Mode::Train);
    CHECK(bn.running_mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 4.0));
    CHECK(bn.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 5.0));
    // eval mode uses the running statistics, not the batch
    const auto out = bn.forward(x, Mode::Eval);
    const double expect = (1.0 - 0.4) / std::sqrt(1.4 + 1e-5);
    CHECK(out[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("batchnorm rejects a single-element statistic window") {
    BatchNorm1dLayer<double> bn;
    bn.init("bn", 2);
    Tensor<double> x({1, 2, 1});
    CHECK_THROWS(bn.forward(x, Mode::Train));
}

TEST_CASE("dropout is identity in eval mode and rescales in train mode") {
    std::mt19937_64 rng(5);
    DropoutLayer<float> drop;
    drop.rate = 0.5f;
    Tensor<float> x({4, 16});
    x.fill(1.0f);
    const auto eval_out = drop.forward(x, Mode::Eval, rng);
    CHECK(eval_out.v == x.v);
    const auto train_out = drop.forward(x, Mode::Train, rng);
    std::size_t kept = 0;
    for (float v : train_out.v) {
        CHECK((v == 0.0f || v == 2.0f)); // inverted scaling by 1/(1-rate)
        if (v != 0.0f) ++kept;
    }
    CHECK(kept > 8);
    CHECK(kept < 56);
}

TEST_CASE("glorot bound") {
    std::mt19937_64 rng(6);
    Tensor<double> w({64, 64, 5});
    glorot_init(w, 64 * 5, 64 * 5, rng);
    const double bound = std::sqrt(6.0 / (64 * 5 + 64 * 5));
    double mx = 0;
    for (auto v : w.v) mx = std::max(mx, std::fabs(v));
    CHECK(mx <= bound);
    CHECK(mx > 0.8 * bound); // the distribution actually fills the range
}

TEST_CASE("softmax cross-entropy worked example") {
    Tensor<double> logits({1, 3});
    logits.v = {1.0, 2.0, 3.0};
    const auto r = kernels::softmax_xent(logits, {2});
    CHECK(r.loss == doctest::Approx(0.407606).epsilon(1e-5));
    // gradient rows sum to zero
    double s = 0;
    for (auto v : r.dlogits.v) s += v;
    CHECK(s == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("uniform logits give ln K") {
    for (std::size_t k : {2, 4, 8, 10}) {
        Tensor<double> logits({3, k});
        logits.fill(0.7);
        const auto r = kernels::softmax_xent(logits, {0, 1, static_cast<int>(k) - 1});
        CHECK(r.loss == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
    }
}

TEST_CASE("cross-entropy rejects bad labels") {
    Tensor<double> logits({2, 3});
    CHECK_THROWS(kernels::softmax_xent(logits, {0}));
    CHECK_THROWS(kernels::softmax_xent(logits, {0, 3}));
}

TEST_CASE("softmax rows are a probability distribution") {
    std::mt19937_64 rng(7);
    Tensor<float> logits({5, 6});
    std::uniform_real_distribution<float> dist(-30.0f, 30.0f);
    for (auto& v : logits.v) v = dist(rng);
    Tensor<float> probs;
    kernels::softmax_rows(logits, probs);
    for (std::size_t b = 0; b < 5; ++b) {
        float s = 0;
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(probs[b * 6 + j] >= 0.0f);
            s += probs[b * 6 + j];
        }
        CHECK(s == doctest::Approx(1.0f).epsilon(1e-5));
    }
}

TEST_CASE("adamw single step matches a hand-computed update") {
    Param<double> p;
    p.init_shape("p", {1});
    p.value[0] = 0.5;
    p.grad[0] = 0.2;
    AdamWConfig cfg;
    cfg.lr = 0.1;
    AdamW<double> opt({&p}, cfg);
    opt.step({&p});
    // bias-corrected first step: m_hat = g, v_hat = g^2
    const double expect =
        0.5 - 0.1 * (0.2 / (std::sqrt(0.2 * 0.2) + 1e-8) + 0.01 * 0.5);
    CHECK(p.value[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adamw weight decay is decoupled from the moments") {
    // zero gradient: the only movement is the decay term
    Param<double> p;
    p.init_shape("p", {1});
    p.value[0] = 1.0;
    p.grad[0] = 0.0;
    AdamWConfig cfg;
    cfg.lr = 0.5;
    cfg.weight_decay = 0.1;
    AdamW<double> opt({&p}, cfg);
    opt.step({&p});
    CHECK(p.value[0] == doctest::Approx(1.0 - 0.5 * 0.1 * 1.0));
}

TEST_CASE("adamw reset clears the moments") {
    Param<double> p;
    p.init_shape("p", {2});
    p.grad.fill(1.0);
    AdamW<double> opt({&p});
    opt.step({&p});
    CHECK(opt.step_count == 1);
    opt.reset({&p});
    CHECK(opt.step_count == 0);
    CHECK(opt.m[0][0] == 0.0);
    CHECK(opt.v[0][0] == 0.0);
}

TEST_CASE("gradient suite passes at tolerance 1e-4") {
    const auto res = run_grad_suite(3);
    CHECK(res.max_rel_err() <= 1e-4);
}

TEST_CASE("gradient checker detects a corrupted backward pass") {
    std::mt19937_64 rng(8);
    LinearLayer<double> lin;
    lin.init("linear", 4, 3, rng);
    Param<double> px;
    px.init_shape("x", {2, 4});
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : px.value.v) v = dist(rng);
    Tensor<double> c({2, 3});
    for (auto& v : c.v) v = dist(rng);
    auto loss = [&]() {
        double s = 0;
        const auto out = lin.forward(px.value);
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * c[i];
        return s;
    };
    loss();
    lin.w.grad.fill(0.0);
    lin.bias.grad.fill(0.0);
    lin.backward(c, false);
    lin.w.grad[0] += 0.25; // corrupt one analytic entry
    const auto rep = grad_check({&lin.w}, loss, 1e-5, 64, 0);
    CHECK(rep.max_rel_err() > 1e-2);
}
