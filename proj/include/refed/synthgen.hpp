#ifndef REFED_SYNTHGEN_HPP
#define REFED_SYNTHGEN_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "refed/dataset.hpp"

namespace refed {

/// Shift applied to the source domain's class profiles: seasonal displacement
/// in timesteps, amplitude scaling, and an additive per-band offset.
struct DomainShift {
    double dt = 2.0;
    double amp_scale = 1.15;
    double offset = 0.05;
};

/// Gaussian-bump phenology profile of one (class, band) pair.
struct ClassProfile {
    double base = 0.0, amp = 0.0, mu = 0.0, sigma = 1.0;
};

struct GeneratorConfig {
    std::size_t n_classes = 5;
    std::size_t t_len = 24;
    std::size_t n_bands = 4;
    std::size_t polygons_per_class = 60; // per domain
    double pixels_per_polygon_mean = 30.0;
    std::size_t pixels_per_polygon_min = 5;
    DomainShift shift{};
    double sigma_poly = 0.03; // per-polygon random effect
    double sigma_pix = 0.05;  // per-pixel noise
    std::uint64_t seed = 0;
    /// Optional explicit profiles (n_classes * n_bands, class-major);
    /// empty means they are derived deterministically from the seed.
    std::vector<ClassProfile> profiles;

    void validate() const;
    /// Fills `profiles` from the seed when not explicitly given.
    std::vector<ClassProfile> resolved_profiles() const;

    std::string to_json() const;
    static GeneratorConfig from_json(const std::string& text);
};

/// Deterministic two-domain generator. Pixel value for class k, band c,
/// time t is base + amp * exp(-(t-mu)^2 / (2 sigma^2)) plus a per-polygon
/// effect and per-pixel noise; source profiles additionally receive the
/// domain shift. Every polygon draws from its own seeded substream, so the
/// output is independent of generation order.
std::pair<LabeledDataset, LabeledDataset> generate(const GeneratorConfig& cfg);

} // namespace refed

#endif
