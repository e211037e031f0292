#ifndef REFED_GRADSUITE_HPP
#define REFED_GRADSUITE_HPP

#include <random>
#include <string>
#include <vector>

#include "refed/gradcheck.hpp"
#include "refed/refed.hpp"

namespace refed {

// Double-precision central-difference sweep over every differentiable
// primitive plus the full disentanglement loss. Used both by the CLI
// `gradcheck` command and by the acceptance harness.

struct GradSuiteCheck {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradSuiteResult {
    std::vector<GradSuiteCheck> checks;

    double max_rel_err() const {
        double m = 0.0;
        for (const auto& c : checks) m = std::max(m, c.max_rel_err);
        return m;
    }
    bool pass(double tol) const { return max_rel_err() <= tol; }
};

namespace gradsuite_detail {

inline Tensor<double> random_tensor(std::vector<std::size_t> shape,
                                    std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& x : t.v) x = dist(rng);
    return t;
}

inline double dot_all(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double record(GradSuiteResult& res, const std::string& name,
                     const GradCheckReport& rep) {
    res.checks.push_back({name, rep.max_rel_err()});
    return rep.max_rel_err();
}

inline void check_conv1d(GradSuiteResult& res, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Conv1dLayer<double> conv;
    conv.init("conv", 2, 3, 5, rng);
    Param<double> px;
    px.init_shape("conv.input", {2, 2, 6});
    px.value = random_tensor({2, 2, 6}, rng);
    const Tensor<double> c = random_tensor({2, 3, 6}, rng);

    auto loss = [&]() { return dot_all(conv.forward(px.value), c); };
    loss(); // populate caches at the unperturbed point
    conv.w.grad.fill(0.0);
    conv.bias.grad.fill(0.0);
    px.grad = conv.backward(c);
    record(res, "conv1d", grad_check({&conv.w, &conv.bias, &px}, loss, 1e-5, 24, seed));
}

inline void check_batchnorm(GradSuiteResult& res, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    BatchNorm1dLayer<double> bn;
    bn.init("bn", 4);
    // keep gamma/beta off their init values so the check is not trivial
    bn.gamma.value = random_tensor({4}, rng, 0.5, 1.5);
    bn.beta.value = random_tensor({4}, rng);
    Param<double> px;
    px.init_shape("bn.input", {3, 4, 5});
    px.value = random_tensor({3, 4, 5}, rng);
    const Tensor<double> c = random_tensor({3, 4, 5}, rng);

    auto loss = [&]() { return dot_all(bn.forward(px.value, Mode::Train), c); };
    loss();
    bn.gamma.grad.fill(0.0);
    bn.beta.grad.fill(0.0);
    px.grad = bn.backward(c);
    record(res, "batchnorm", grad_check({&bn.gamma, &bn.beta, &px}, loss, 1e-5, 24, seed));
}

inline void check_linear(GradSuiteResult& res, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LinearLayer<double> lin;
    lin.init("linear", 5, 3, rng);
    Param<double> px;
    px.init_shape("linear.input", {4, 5});
    px.value = random_tensor({4, 5}, rng);
    const Tensor<double> c = random_tensor({4, 3}, rng);

    auto loss = [&]() { return dot_all(lin.forward(px.value), c); };
    loss();
    lin.w.grad.fill(0.0);
    lin.bias.grad.fill(0.0);
    px.grad = lin.backward(c);
    record(res, "linear", grad_check({&lin.w, &lin.bias, &px}, loss, 1e-5, 24, seed));
}

inline void check_relu(GradSuiteResult& res, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ReluLayer<double> relu;
    Param<double> px;
    px.init_shape("relu.input", {3, 7});
    // keep values away from the kink so finite differences stay valid
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& x : px.value.v) x = (sign(rng) ? 1.0 : -1.0) * mag(rng);
    const Tensor<double> c = random_tensor({3, 7}, rng);

    auto loss = [&]() { return dot_all(relu.forward(px.value), c); };
    loss();
    px.grad = relu.backward(c);
    record(res, "relu", grad_check({&px}, loss, 1e-5, 24, seed));
}

inline void check_dropout(GradSuiteResult& res, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DropoutLayer<double> drop;
    drop.rate = 0.5;
    Param<double> px;
    px.init_shape("dropout.input", {3, 8});
    px.value = random_tensor({3, 8}, rng);
    const Tensor<double> c = random_tensor({3, 8}, rng);

    drop.forward(px.value, Mode::Train, rng); // freeze one mask
    px.grad = drop.backward(c);
    const double scale = 1.0 / (1.0 - drop.rate);
    auto loss = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < px.value.size(); ++i)
            if (drop.mask[i]) s += px.value[i] * scale * c[i];
        return s;
    };
    record(res, "dropout", grad_check({&px}, loss, 1e-5, 24, seed));
}

inline void check_softmax_xent(GradSuiteResult& res, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Param<double> logits;
    logits.init_shape("xent.logits", {4, 3});
    logits.value = random_tensor({4, 3}, rng);
    std::uniform_int_distribution<int> lab(0, 2);
    std::vector<int> labels(4);
    for (auto& l : labels) l = lab(rng);

    auto loss = [&]() { return kernels::softmax_xent(logits.value, labels).loss; };
    logits.grad = kernels::softmax_xent(logits.value, labels).dlogits;
    record(res, "softmax_xent", grad_check({&logits}, loss, 1e-5, 24, seed));
}

inline void check_contrastive(GradSuiteResult& res, std::uint64_t seed,
                              bool normalize) {
    std::mt19937_64 rng(seed);
    Param<double> z;
    z.init_shape("contrastive.z", {6, 4});
    z.value = random_tensor({6, 4}, rng);
    std::uniform_int_distribution<int> lab(0, 2);
    std::vector<int> labels(6);
    for (auto& l : labels) l = lab(rng);
    labels[1] = labels[0]; // guarantee at least one positive pair
    const double tau = 0.07;

    auto loss = [&]() {
        return contrastive_level(z.value, labels, tau, normalize).loss;
    };
    z.grad = contrastive_level(z.value, labels, tau, normalize).dz;
    record(res, normalize ? "contrastive_normalized" : "contrastive_raw",
           grad_check({&z}, loss, 1e-5, 24, seed));
}

inline void check_full_model(GradSuiteResult& res, std::uint64_t seed) {
    const std::size_t batch = 8, t_len = 6, c_in = 2, k = 3;
    std::mt19937_64 rng(seed);
    RefedModel<double> model;
    // dropout frozen at 0 so repeated evaluations see identical activations
    model.init(t_len, c_in, k, 0.0, 0.07, true, seed);
    Tensor<double> x = random_tensor({batch, t_len, c_in}, rng);
    std::uniform_int_distribution<int> lab(0, static_cast<int>(k) - 1);
    std::vector<int> labels(batch), domains(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        labels[i] = lab(rng);
        domains[i] = i < batch / 2 ? 0 : 1;
    }

    auto params = model.parameters();
    auto loss = [&]() {
        return forward_losses(model, x, labels, domains, Mode::Train, false).total;
    };
    zero_grads(params);
    forward_losses(model, x, labels, domains, Mode::Train, true);
    // smaller step than the primitives: batchnorm inside the stacked blocks
    // gives the composed loss much higher curvature
    record(res, "refed_total_loss", grad_check(params, loss, 1e-6, 6, seed));
}

} // namespace gradsuite_detail

inline GradSuiteResult run_grad_suite(std::size_t n_seeds = 20) {
    GradSuiteResult res;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        using namespace gradsuite_detail;
        check_conv1d(res, s);
        check_batchnorm(res, s);
        check_linear(res, s);
        check_relu(res, s);
        check_dropout(res, s);
        check_softmax_xent(res, s);
        check_contrastive(res, s, true);
        check_contrastive(res, s, false);
        check_full_model(res, s);
    }
    return res;
}

} // namespace refed

#endif
