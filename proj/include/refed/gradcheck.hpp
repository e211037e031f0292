#ifndef REFED_GRADCHECK_HPP
#define REFED_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "refed/nn.hpp"

namespace refed {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;

    double max_rel_err() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, e.max_rel_err);
        return m;
    }
};

/// Central-difference check of the analytic gradients stored in the params'
/// grad buffers against the scalar function `loss_fn` (which must evaluate
/// the loss from the current parameter values without touching the grads).
/// Coordinates are subsampled per parameter with the seeded generator.
inline GradCheckReport grad_check(const std::vector<Param<double>*>& params,
                                  const std::function<double()>& loss_fn,
                                  double eps = 1e-5,
                                  std::size_t max_coords_per_param = 24,
                                  std::uint64_t seed = 0) {
    std::mt19937_64 rng(seed);
    GradCheckReport report;
    for (auto* p : params) {
        GradCheckEntry entry;
        entry.name = p->name;
        const std::size_t n = p->value.size();
        std::vector<std::size_t> coords(n);
        for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        if (n > max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_coords_per_param);
        }
        for (std::size_t i : coords) {
            const double orig = p->value[i];
            p->value[i] = orig + eps;
            const double fp = loss_fn();
            p->value[i] = orig - eps;
            const double fm = loss_fn();
            p->value[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw std::runtime_error("grad_check: non-finite evaluation");
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = p->grad[i];
            // The denominator floor keeps roundoff-level disagreement on
            // (near-)zero gradients from registering as a large relative
            // error; real formula bugs scale with the gradient magnitude
            // and still surface on the larger coordinates.
            const double rel = std::fabs(analytic - numeric) /
                               std::max(1e-4, std::fabs(analytic) + std::fabs(numeric));
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            ++entry.coords_checked;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace refed

#endif
