#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "refed/adamw.hpp"
#include "refed/tempcnn.hpp"

using namespace refed;

namespace {

Tensor<float> random_batch(std::size_t b, std::size_t t, std::size_t c,
                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    Tensor<float> x({b, t, c});
    for (auto& v : x.v) v = dist(rng);
    return x;
}

std::size_t param_count(std::vector<Param<float>*> params) {
    std::size_t n = 0;
    for (auto* p : params) n += p->value.size();
    return n;
}

} // namespace

TEST_CASE("encoder trainable parameter count for C=4") {
    Encoder<float> enc;
    std::mt19937_64 rng(0);
    enc.init("enc", 24, 4, 0.5f, rng);
    std::vector<Param<float>*> params;
    enc.collect(params);
    // conv1: 64*4*5+64, bn1: 128; conv2/3: 64*64*5+64, bn: 128 each
    CHECK(param_count(params) == 42816);
}

TEST_CASE("encoder feature dimension and tap shapes") {
    Encoder<float> enc;
    std::mt19937_64 rng(1);
    enc.init("enc", 24, 4, 0.5f, rng);
    CHECK(enc.feature_dim() == 64 * 24);
    std::mt19937_64 drop_rng(2);
    const auto x = random_batch(3, 24, 4, 7);
    auto taps = enc.forward(x, Mode::Eval, drop_rng);
    CHECK(taps.z0.shape == std::vector<std::size_t>{3, 1536});
    CHECK(taps.z1.shape == std::vector<std::size_t>{3, 1536});
    CHECK_THROWS(enc.forward(random_batch(3, 20, 4, 7), Mode::Eval, drop_rng));
    CHECK_THROWS(enc.forward(random_batch(3, 24, 3, 7), Mode::Eval, drop_rng));
}

TEST_CASE("classifier produces a 256-unit hidden tap and K logits") {
    Classifier<float> cls;
    std::mt19937_64 rng(3);
    cls.init("cls", 1536, 8, 0.5f, rng);
    std::mt19937_64 drop_rng(4);
    Tensor<float> z1({5, 1536});
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (auto& v : z1.v) v = dist(rng);
    auto out = cls.forward(z1, Mode::Eval, drop_rng);
    CHECK(out.hidden.shape == std::vector<std::size_t>{5, 256});
    CHECK(out.logits.shape == std::vector<std::size_t>{5, 8});
    for (auto v : out.hidden.v) CHECK(v >= 0.0f); // post-ReLU tap
}

TEST_CASE("same seed gives identical models, different seeds differ") {
    TempCnnModel<float> a, b, c;
    a.init(12, 2, 4, 0.5f, 77);
    b.init(12, 2, 4, 0.5f, 77);
    c.init(12, 2, 4, 0.5f, 78);
    const auto x = random_batch(4, 12, 2, 9);
    const auto la = a.logits(x, Mode::Eval);
    const auto lb = b.logits(x, Mode::Eval);
    const auto lc = c.logits(x, Mode::Eval);
    CHECK(la.v == lb.v);
    CHECK(la.v != lc.v);
}

TEST_CASE("eval mode is deterministic, train mode consumes dropout noise") {
    TempCnnModel<float> m;
    m.init(12, 2, 4, 0.5f, 5);
    const auto x = random_batch(4, 12, 2, 10);
    const auto e1 = m.logits(x, Mode::Eval);
    const auto e2 = m.logits(x, Mode::Eval);
    CHECK(e1.v == e2.v);
    const auto t1 = m.logits(x, Mode::Train);
    const auto t2 = m.logits(x, Mode::Train);
    CHECK(t1.v != t2.v); // fresh masks per pass
}

TEST_CASE("model state is the parameters plus batchnorm statistics") {
    TempCnnModel<float> m;
    m.init(12, 2, 4, 0.5f, 6);
    auto state = m.state();
    std::size_t running = 0, weights = 0;
    for (const auto& [name, tensor] : state) {
        (void)tensor;
        if (name.find("running_") != std::string::npos) ++running;
        else ++weights;
    }
    CHECK(running == 8); // 4 batchnorm layers x (mean, var)
    CHECK(weights == static_cast<std::size_t>(18));
    // names are unique
    for (std::size_t i = 0; i < state.size(); ++i)
        for (std::size_t j = i + 1; j < state.size(); ++j)
            CHECK(state[i].first != state[j].first);
}

TEST_CASE("a few training steps reduce the loss on a fixed batch") {
    TempCnnModel<float> m;
    m.init(10, 2, 3, 0.0f, 8);
    auto params = m.parameters();
    AdamWConfig cfg;
    cfg.lr = 1e-3;
    AdamW<float> opt(params, cfg);
    const auto x = random_batch(16, 10, 2, 11);
    std::vector<int> labels(16);
    for (int i = 0; i < 16; ++i) labels[i] = i % 3;
    float first = 0, last = 0;
    for (int step = 0; step < 30; ++step) {
        zero_grads(params);
        auto logits = m.logits(x, Mode::Train);
        auto ce = kernels::softmax_xent(logits, labels);
        m.enc.backward(m.cls.backward(ce.dlogits));
        opt.step(params);
        if (step == 0) first = ce.loss;
        last = ce.loss;
    }
    CHECK(last < 0.5f * first);
}
