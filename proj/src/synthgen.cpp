#include "refed/synthgen.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace refed {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                        std::uint64_t c) {
    return splitmix64(splitmix64(splitmix64(seed ^ a) ^ b) ^ c);
}

} // namespace

void GeneratorConfig::validate() const {
    if (n_classes < 1 || t_len < 1 || n_bands < 1 || polygons_per_class < 1)
        throw std::invalid_argument("generator: K, T, C and polygon counts must be >= 1");
    if (sigma_poly <= 0 || sigma_pix <= 0)
        throw std::invalid_argument("generator: noise sigmas must be positive");
    if (pixels_per_polygon_min < 1 || pixels_per_polygon_mean < 1)
        throw std::invalid_argument("generator: pixel counts must be >= 1");
    if (std::fabs(shift.dt) >= static_cast<double>(t_len))
        throw std::invalid_argument("generator: |dt| must be < T");
    if (!std::isfinite(shift.dt) || !std::isfinite(shift.amp_scale) ||
        !std::isfinite(shift.offset))
        throw std::invalid_argument("generator: shift fields must be finite");
    if (!profiles.empty() && profiles.size() != n_classes * n_bands)
        throw std::invalid_argument("generator: profiles must have K*C entries");
}

std::vector<ClassProfile> GeneratorConfig::resolved_profiles() const {
    if (!profiles.empty()) return profiles;
    std::mt19937_64 rng(splitmix64(seed ^ 0x70726f66ULL));
    // Classes form a phenological sequence: baseline, amplitude and width are
    // drawn per band and shared by every class, so class identity is carried
    // almost entirely by the peak time. Peaks are spaced T/(K+1) apart, twice
    // the default temporal shift: shifted source peaks land halfway between
    // two neighbouring target peaks, so a classifier trained on one domain
    // alone degrades badly on the other, while the within-domain task (and
    // the mixed-domain task, whose 2K effective peak positions stay distinct)
    // remains easy.
    std::uniform_real_distribution<double> base_d(0.05, 0.25), amp_d(0.5, 0.8);
    std::uniform_real_distribution<double> sig_d(t_len / 10.0, t_len / 7.0);
    std::uniform_real_distribution<double> jitter_d(-0.015 * t_len, 0.015 * t_len);
    std::vector<double> band_base(n_bands), band_amp(n_bands), band_sig(n_bands);
    for (std::size_t c = 0; c < n_bands; ++c) {
        band_base[c] = base_d(rng);
        band_amp[c] = amp_d(rng);
        band_sig[c] = sig_d(rng);
    }
    const double step = t_len / static_cast<double>(n_classes + 1);
    std::vector<ClassProfile> out(n_classes * n_bands);
    for (std::size_t k = 0; k < n_classes; ++k) {
        const double mu = (static_cast<double>(k) + 0.75) * step;
        for (std::size_t c = 0; c < n_bands; ++c)
            out[k * n_bands + c] = {band_base[c], band_amp[c],
                                    mu + jitter_d(rng), band_sig[c]};
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> generate(const GeneratorConfig& cfg) {
    cfg.validate();
    const auto profiles = cfg.resolved_profiles();

    auto make_domain = [&](Domain domain) {
        LabeledDataset ds;
        ds.t_len = cfg.t_len;
        ds.n_bands = cfg.n_bands;
        ds.n_classes = cfg.n_classes;
        for (std::size_t k = 0; k < cfg.n_classes; ++k)
            ds.class_names.push_back("class_" + std::to_string(k));
        const bool shifted = domain == Domain::Source;
        std::uint32_t next_pid = 0;
        for (std::size_t k = 0; k < cfg.n_classes; ++k)
            for (std::size_t p = 0; p < cfg.polygons_per_class; ++p) {
                std::mt19937_64 rng(substream(
                    cfg.seed, static_cast<std::uint64_t>(domain) + 1, k + 1, p + 1));
                std::poisson_distribution<long> count_d(cfg.pixels_per_polygon_mean);
                const std::size_t n_px = std::max<long>(
                    static_cast<long>(cfg.pixels_per_polygon_min), count_d(rng));
                std::normal_distribution<double> poly_d(0.0, cfg.sigma_poly);
                std::vector<double> poly_effect(cfg.n_bands);
                for (auto& e : poly_effect) e = poly_d(rng);
                std::normal_distribution<double> pix_d(0.0, cfg.sigma_pix);
                const std::uint32_t pid = next_pid++;
                for (std::size_t px = 0; px < n_px; ++px) {
                    for (std::size_t t = 0; t < cfg.t_len; ++t)
                        for (std::size_t c = 0; c < cfg.n_bands; ++c) {
                            const auto& prof = profiles[k * cfg.n_bands + c];
                            double mu = prof.mu, amp = prof.amp, off = 0.0;
                            if (shifted) {
                                mu += cfg.shift.dt;
                                amp *= cfg.shift.amp_scale;
                                off = cfg.shift.offset;
                            }
                            const double dtm = static_cast<double>(t) - mu;
                            const double v =
                                prof.base + off +
                                amp * std::exp(-dtm * dtm / (2.0 * prof.sigma * prof.sigma)) +
                                poly_effect[c] + pix_d(rng);
                            ds.features.push_back(static_cast<float>(v));
                        }
                    ds.labels.push_back(static_cast<std::uint16_t>(k));
                    ds.polygon_ids.push_back(pid);
                    ds.domains.push_back(static_cast<std::uint8_t>(domain));
                }
            }
        return ds;
    };

    return {make_domain(Domain::Source), make_domain(Domain::Target)};
}

std::string GeneratorConfig::to_json() const {
    nlohmann::ordered_json j;
    j["n_classes"] = n_classes;
    j["t_len"] = t_len;
    j["n_bands"] = n_bands;
    j["polygons_per_class"] = polygons_per_class;
    j["pixels_per_polygon_mean"] = pixels_per_polygon_mean;
    j["pixels_per_polygon_min"] = pixels_per_polygon_min;
    j["shift"] = {{"dt", shift.dt},
                  {"amp_scale", shift.amp_scale},
                  {"offset", shift.offset}};
    j["sigma_poly"] = sigma_poly;
    j["sigma_pix"] = sigma_pix;
    j["seed"] = seed;
    nlohmann::ordered_json profs = nlohmann::ordered_json::array();
    for (const auto& p : resolved_profiles())
        profs.push_back({{"base", p.base},
                         {"amp", p.amp},
                         {"mu", p.mu},
                         {"sigma", p.sigma}});
    j["profiles"] = std::move(profs);
    return j.dump(2) + "\n";
}

GeneratorConfig GeneratorConfig::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    GeneratorConfig cfg;
    cfg.n_classes = j.value("n_classes", cfg.n_classes);
    cfg.t_len = j.value("t_len", cfg.t_len);
    cfg.n_bands = j.value("n_bands", cfg.n_bands);
    cfg.polygons_per_class = j.value("polygons_per_class", cfg.polygons_per_class);
    cfg.pixels_per_polygon_mean =
        j.value("pixels_per_polygon_mean", cfg.pixels_per_polygon_mean);
    cfg.pixels_per_polygon_min =
        j.value("pixels_per_polygon_min", cfg.pixels_per_polygon_min);
    if (j.contains("shift")) {
        cfg.shift.dt = j["shift"].value("dt", cfg.shift.dt);
        cfg.shift.amp_scale = j["shift"].value("amp_scale", cfg.shift.amp_scale);
        cfg.shift.offset = j["shift"].value("offset", cfg.shift.offset);
    }
    cfg.sigma_poly = j.value("sigma_poly", cfg.sigma_poly);
    cfg.sigma_pix = j.value("sigma_pix", cfg.sigma_pix);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("profiles")) {
        for (const auto& p : j["profiles"])
            cfg.profiles.push_back({p.at("base").get<double>(),
                                    p.at("amp").get<double>(),
                                    p.at("mu").get<double>(),
                                    p.at("sigma").get<double>()});
    }
    cfg.validate();
    return cfg;
}

} // namespace refed
