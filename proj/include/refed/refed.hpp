#ifndef REFED_REFED_HPP
#define REFED_REFED_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "refed/adamw.hpp"
#include "refed/dataset.hpp"
#include "refed/tempcnn.hpp"
#include "refed/training.hpp"

namespace refed {

// The feature-disentanglement model: a pseudo-siamese pair of TempCNN
// encoders with unshared parameters. g_inv feeds the task classifier f,
// g_spe feeds the domain classifier f_dom; a supervised contrastive loss
// over the 3K-way mixed label space ties the two branches together at three
// feature depths. Inference uses only g_inv and f.

template <class T>
struct LossBreakdown {
    T l_cl = 0, l_dom = 0, l_con_0 = 0, l_con_1 = 0, l_con_2 = 0, total = 0;
};

template <class T>
struct ContrastiveResult {
    T loss = 0;
    Tensor<T> dz; // same shape as the input embeddings
};

/// Supervised contrastive loss over one level's augmented batch.
/// z: [2B, d] raw embeddings; labels: mixed labels in [0, 3K).
/// Embeddings are L2-normalized internally when `normalize` is set.
/// Anchors without positives contribute nothing; the outer sum is averaged
/// over contributing anchors.
template <class T>
ContrastiveResult<T> contrastive_level(const Tensor<T>& z,
                                       const std::vector<int>& labels, T tau,
                                       bool normalize = true) {
    const std::size_t n = z.dim(0), d = z.dim(1);
    if (n < 2) throw std::invalid_argument("contrastive_level: needs >= 2 items");
    if (labels.size() != n)
        throw std::invalid_argument("contrastive_level: label count mismatch");
    if (tau <= T(0)) throw std::invalid_argument("contrastive_level: tau must be positive");

    ContrastiveResult<T> res;
    res.dz = Tensor<T>({n, d});

    Tensor<T> nz = z;
    std::vector<T> norms(n, T(1));
    if (normalize) {
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            T sq = 0;
            const T* src = z.data() + i * d;
            for (std::size_t c = 0; c < d; ++c) sq += src[c] * src[c];
            const T nrm = std::sqrt(sq);
            norms[i] = nrm > T(1e-12) ? nrm : T(1);
            T* dst = nz.data() + i * d;
            for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] / norms[i];
        }
    }

    Tensor<T> g({n, n});
    kernels::par::gram(nz.data(), n, d, tau, g.data());

    // Per-anchor log-sum-exp over a != i, with max subtraction.
    std::vector<T> lse(n);
    std::vector<std::vector<std::size_t>> positives(n);
    std::size_t contributing = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < n; ++a)
            if (a != i && labels[a] == labels[i]) positives[i].push_back(a);
        if (!positives[i].empty()) ++contributing;
        const T* row = g.data() + i * n;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) mx = std::max(mx, row[a]);
        T denom = 0;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) denom += std::exp(row[a] - mx);
        lse[i] = mx + std::log(denom);
    }
    if (contributing == 0) return res;

    Tensor<T> dg({n, n});
    T total = 0;
    const T inv_a = T(1) / static_cast<T>(contributing);
    for (std::size_t i = 0; i < n; ++i) {
        if (positives[i].empty()) continue;
        const T* row = g.data() + i * n;
        T* drow = dg.data() + i * n;
        T anchor_loss = 0;
        const T inv_p = T(1) / static_cast<T>(positives[i].size());
        for (std::size_t p : positives[i]) anchor_loss += (lse[i] - row[p]) * inv_p;
        total += anchor_loss;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) drow[a] = std::exp(row[a] - lse[i]) * inv_a;
        for (std::size_t p : positives[i]) drow[p] -= inv_p * inv_a;
    }
    res.loss = total * inv_a;

    // dN = (dG + dG^T) N / tau, then back through the normalization.
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = i + 1; a < n; ++a) {
            const T s = dg[i * n + a] + dg[a * n + i];
            dg[i * n + a] = s;
            dg[a * n + i] = s;
        }
    Tensor<T> dn({n, d});
    kernels::gemm(false, false, static_cast<int>(n), static_cast<int>(d),
                  static_cast<int>(n), T(1) / tau, dg.data(),
                  static_cast<int>(n), nz.data(), static_cast<int>(d), T(0),
                  dn.data(), static_cast<int>(d));
    if (normalize) {
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            const T* ni = nz.data() + i * d;
            const T* dni = dn.data() + i * d;
            T* dzi = res.dz.data() + i * d;
            T dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += ni[c] * dni[c];
            for (std::size_t c = 0; c < d; ++c)
                dzi[c] = (dni[c] - dot * ni[c]) / norms[i];
        }
    } else {
        res.dz = std::move(dn);
    }
    return res;
}

template <class T>
struct RefedModel {
    std::size_t t_len = 0, c_in = 0, n_classes = 0;
    T tau = T(0.07);
    bool normalize_embeddings = true;
    Encoder<T> g_inv, g_spe;
    Classifier<T> f;     // task head, M = K
    Classifier<T> f_dom; // domain head, M = 2
    std::mt19937_64 dropout_rng{0};

    void init(std::size_t t, std::size_t c, std::size_t k, T dropout_rate,
              T temperature, bool normalize, std::uint64_t seed) {
        t_len = t;
        c_in = c;
        n_classes = k;
        tau = temperature;
        normalize_embeddings = normalize;
        if (tau <= T(0)) throw std::invalid_argument("refed: tau must be positive");
        std::mt19937_64 rng(seed);
        g_inv.init("g_inv", t, c, dropout_rate, rng);
        g_spe.init("g_spe", t, c, dropout_rate, rng);
        f.init("f", g_inv.feature_dim(), k, dropout_rate, rng);
        f_dom.init("f_dom", g_spe.feature_dim(), 2, dropout_rate, rng);
        dropout_rng.seed(seed ^ 0x9e3779b97f4a7c15ULL);
    }

    std::vector<Param<T>*> parameters() {
        std::vector<Param<T>*> out;
        g_inv.collect(out);
        f.collect(out);
        g_spe.collect(out);
        f_dom.collect(out);
        return out;
    }

    NamedTensors<T> state() {
        NamedTensors<T> out;
        g_inv.collect_state(out);
        f.collect_state(out);
        g_spe.collect_state(out);
        f_dom.collect_state(out);
        return out;
    }

    /// Inference-path logits: f(g_inv(x)), independent of g_spe / f_dom.
    Tensor<T> logits(const Tensor<T>& x, Mode mode = Mode::Eval) {
        auto taps = g_inv.forward(x, mode, dropout_rng);
        return f.forward(taps.z1, mode, dropout_rng).logits;
    }
};

/// Mean cross-entropy of the domain head over a batch: f_dom(g_spe(x)).
template <class T>
T loss_domain(RefedModel<T>& model, const Tensor<T>& x,
              const std::vector<int>& domain_tags, Mode mode = Mode::Eval) {
    if (x.dim(0) == 0) throw std::invalid_argument("loss_domain: empty batch");
    auto taps = model.g_spe.forward(x, mode, model.dropout_rng);
    auto out = model.f_dom.forward(taps.z1, mode, model.dropout_rng);
    return kernels::softmax_xent(out.logits, domain_tags).loss;
}

/// Mean cross-entropy of the task head over a batch: f(g_inv(x)).
template <class T>
T loss_task(RefedModel<T>& model, const Tensor<T>& x,
            const std::vector<int>& class_labels, Mode mode = Mode::Eval) {
    if (x.dim(0) == 0) throw std::invalid_argument("loss_task: empty batch");
    auto taps = model.g_inv.forward(x, mode, model.dropout_rng);
    auto out = model.f.forward(taps.z1, mode, model.dropout_rng);
    return kernels::softmax_xent(out.logits, class_labels).loss;
}

namespace detail {

template <class T>
Tensor<T> stack_rows(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out({a.dim(0) + b.dim(0), a.dim(1)});
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.size());
    return out;
}

} // namespace detail

/// Runs both branches on one batch, computes all five loss components and,
/// when `do_backward` is set, accumulates parameter gradients for the total.
template <class T>
LossBreakdown<T> forward_losses(RefedModel<T>& model, const Tensor<T>& x,
                                const std::vector<int>& class_labels,
                                const std::vector<int>& domain_tags, Mode mode,
                                bool do_backward = false) {
    const std::size_t batch = x.dim(0);
    if (batch == 0) throw std::invalid_argument("forward_losses: empty batch");
    const int k = static_cast<int>(model.n_classes);

    auto inv_taps = model.g_inv.forward(x, mode, model.dropout_rng);
    auto inv_head = model.f.forward(inv_taps.z1, mode, model.dropout_rng);
    auto spe_taps = model.g_spe.forward(x, mode, model.dropout_rng);
    auto spe_head = model.f_dom.forward(spe_taps.z1, mode, model.dropout_rng);

    auto cl = kernels::softmax_xent(inv_head.logits, class_labels);
    auto dom = kernels::softmax_xent(spe_head.logits, domain_tags);

    // Augmented 2B-item batch: invariant items first, then specific ones.
    std::vector<int> mixed(2 * batch);
    for (std::size_t i = 0; i < batch; ++i) {
        mixed[i] = mixed_label(class_labels[i], FeatureKind::Invariant,
                               static_cast<Domain>(domain_tags[i]), k);
        mixed[batch + i] = mixed_label(class_labels[i], FeatureKind::Specific,
                                       static_cast<Domain>(domain_tags[i]), k);
    }
    auto con0 = contrastive_level(detail::stack_rows(inv_taps.z0, spe_taps.z0),
                                  mixed, model.tau, model.normalize_embeddings);
    auto con1 = contrastive_level(detail::stack_rows(inv_taps.z1, spe_taps.z1),
                                  mixed, model.tau, model.normalize_embeddings);
    auto con2 = contrastive_level(detail::stack_rows(inv_head.hidden, spe_head.hidden),
                                  mixed, model.tau, model.normalize_embeddings);

    LossBreakdown<T> lb;
    lb.l_cl = cl.loss;
    lb.l_dom = dom.loss;
    lb.l_con_0 = con0.loss;
    lb.l_con_1 = con1.loss;
    lb.l_con_2 = con2.loss;
    lb.total = lb.l_cl + lb.l_dom + lb.l_con_0 + lb.l_con_1 + lb.l_con_2;

    if (do_backward) {
        const std::size_t dim01 = inv_taps.z0.dim(1), dim2 = inv_head.hidden.dim(1);
        auto split = [](const Tensor<T>& dz, std::size_t b, std::size_t d) {
            Tensor<T> top({b, d}), bottom({b, d});
            std::copy(dz.v.begin(), dz.v.begin() + b * d, top.v.begin());
            std::copy(dz.v.begin() + b * d, dz.v.end(), bottom.v.begin());
            return std::make_pair(std::move(top), std::move(bottom));
        };
        auto [dz0_inv, dz0_spe] = split(con0.dz, batch, dim01);
        auto [dz1_inv_con, dz1_spe_con] = split(con1.dz, batch, dim01);
        auto [dz2_inv, dz2_spe] = split(con2.dz, batch, dim2);

        Tensor<T> dz1_inv = model.f.backward(cl.dlogits, &dz2_inv);
        for (std::size_t i = 0; i < dz1_inv.size(); ++i) dz1_inv[i] += dz1_inv_con[i];
        model.g_inv.backward(dz1_inv, &dz0_inv);

        Tensor<T> dz1_spe = model.f_dom.backward(dom.dlogits, &dz2_spe);
        for (std::size_t i = 0; i < dz1_spe.size(); ++i) dz1_spe[i] += dz1_spe_con[i];
        model.g_spe.backward(dz1_spe, &dz0_spe);
    }
    return lb;
}

struct RefedTrainConfig {
    int epochs = 200;
    std::size_t batch_size = 512;
    AdamWConfig opt{};
    double tau = 0.07;
    double dropout = 0.5;
    bool normalize_embeddings = true;
    std::uint64_t seed = 0;
};

struct RefedFitResult {
    RefedModel<float> model;
    TrainLog log;
};

/// Trains REFeD on the concatenated source + target-train pool; per-epoch
/// model selection by validation weighted F1 on the target validation pool
/// (ties resolved toward the later epoch).
inline RefedFitResult fit_refed(const LabeledDataset& source,
                                const std::vector<SampleRef>& target_train,
                                const std::vector<SampleRef>& target_val,
                                const RefedTrainConfig& cfg) {
    if (target_train.empty() || target_val.empty())
        throw std::invalid_argument("fit_refed: empty target partition");
    const auto& tds = *target_train.front().ds;
    if (source.t_len != tds.t_len || source.n_bands != tds.n_bands ||
        source.n_classes != tds.n_classes)
        throw std::invalid_argument("fit_refed: source/target metadata mismatch");

    RefedFitResult res;
    res.model.init(source.t_len, source.n_bands, source.n_classes,
                   static_cast<float>(cfg.dropout), static_cast<float>(cfg.tau),
                   cfg.normalize_embeddings, cfg.seed);
    auto params = res.model.parameters();
    AdamW<float> opt(params, cfg.opt);

    std::vector<SampleRef> pool = make_pool(source);
    pool.insert(pool.end(), target_train.begin(), target_train.end());
    std::mt19937_64 shuffle_rng(cfg.seed + 0x51a5u);

    const auto state = res.model.state();
    std::vector<Tensor<float>> best;
    Tensor<float> x;
    std::vector<int> labels, domains;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(pool.begin(), pool.end(), shuffle_rng);
        EpochRecord rec;
        rec.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < pool.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, pool.size());
            fill_batch(pool, begin, end, x, labels, domains);
            zero_grads(params);
            auto lb = forward_losses(res.model, x, labels, domains, Mode::Train, true);
            opt.step(params);
            rec.l_cl += lb.l_cl;
            rec.l_dom += lb.l_dom;
            rec.l_con_0 += lb.l_con_0;
            rec.l_con_1 += lb.l_con_1;
            rec.l_con_2 += lb.l_con_2;
            rec.total += lb.total;
            ++batches;
        }
        if (batches) {
            rec.l_cl /= batches;
            rec.l_dom /= batches;
            rec.l_con_0 /= batches;
            rec.l_con_1 /= batches;
            rec.l_con_2 /= batches;
            rec.total /= batches;
        }
        auto [f1, acc] = evaluate_pool<float>(
            target_val, source.n_classes,
            [&](const Tensor<float>& b) { return res.model.logits(b, Mode::Eval); });
        rec.val_f1 = f1;
        rec.val_acc = acc;
        if (res.log.best_epoch < 0 || f1 >= res.log.best_val_f1) {
            res.log.best_epoch = epoch;
            res.log.best_val_f1 = f1;
            rec.is_best = true;
            best = snapshot_state(state);
        }
        res.log.epochs.push_back(rec);
    }
    if (!best.empty()) restore_state(state, best);
    return res;
}

/// Predicted labels and class probability rows for a batch, eval mode.
template <class T>
std::pair<std::vector<int>, Tensor<T>> infer(RefedModel<T>& model,
                                             const Tensor<T>& x) {
    Tensor<T> logits = model.logits(x, Mode::Eval);
    Tensor<T> probs;
    kernels::softmax_rows(logits, probs);
    std::vector<int> preds(x.dim(0));
    const std::size_t m = probs.dim(1);
    for (std::size_t b = 0; b < x.dim(0); ++b) {
        const T* row = probs.data() + b * m;
        std::size_t arg = 0;
        for (std::size_t j = 1; j < m; ++j)
            if (row[j] > row[arg]) arg = j;
        preds[b] = static_cast<int>(arg);
    }
    return {std::move(preds), std::move(probs)};
}

/// Invariant-branch features of every sample at one supervision level.
template <class T>
Tensor<T> embed_level(RefedModel<T>& model, const Tensor<T>& x, int level) {
    if (level < 0 || level > 2)
        throw std::invalid_argument("embed_level: level must be 0, 1 or 2");
    auto taps = model.g_inv.forward(x, Mode::Eval, model.dropout_rng);
    if (level == 0) return taps.z0;
    if (level == 1) return taps.z1;
    return model.f.forward(taps.z1, Mode::Eval, model.dropout_rng).hidden;
}

void export_embeddings(const LabeledDataset& ds, RefedModel<float>& model,
                       int level, const std::string& out_path);

} // namespace refed

#endif
