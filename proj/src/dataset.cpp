#include "refed/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace refed {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'T', 'S', 'B', '0', '0', '1'};

// SITSB v1 is little-endian throughout; these helpers assume a little-endian
// host, which is checked once at load/save time.
void require_little_endian() {
    const std::uint32_t probe = 1;
    char b;
    std::memcpy(&b, &probe, 1);
    if (b != 1) throw std::runtime_error("SITSB io requires a little-endian host");
}

struct Reader {
    std::ifstream in;
    std::size_t offset = 0;

    explicit Reader(const std::string& path) : in(path, std::ios::binary) {
        if (!in) throw ParseError("cannot open dataset file '" + path + "'", 0);
    }

    void read_raw(void* dst, std::size_t n, const char* what) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw ParseError(std::string("truncated payload while reading ") + what,
                             offset);
        offset += n;
    }

    std::uint16_t u16(const char* what) {
        std::uint16_t x;
        read_raw(&x, 2, what);
        return x;
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t x;
        read_raw(&x, 4, what);
        return x;
    }
};

struct Writer {
    std::ofstream out;

    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    }

    void write_raw(const void* src, std::size_t n) {
        out.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
    }
    void u16(std::uint16_t x) { write_raw(&x, 2); }
    void u32(std::uint32_t x) { write_raw(&x, 4); }
};

} // namespace

SitsSample LabeledDataset::sample(std::size_t i) const {
    auto f = sample_features(i);
    return SitsSample{{f.begin(), f.end()},
                      static_cast<int>(labels[i]),
                      static_cast<Domain>(domains[i]),
                      polygon_ids[i]};
}

std::size_t LabeledDataset::count_domain(Domain d) const {
    std::size_t n = 0;
    for (auto t : domains)
        if (t == static_cast<std::uint8_t>(d)) ++n;
    return n;
}

void LabeledDataset::validate() const {
    const std::size_t n = labels.size();
    if (polygon_ids.size() != n || domains.size() != n ||
        features.size() != n * sample_len())
        throw std::runtime_error("dataset: column lengths disagree");
    if (class_names.size() != n_classes)
        throw std::runtime_error("dataset: class name count != n_classes");
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= n_classes)
            throw std::runtime_error("dataset: label out of range at sample " +
                                     std::to_string(i));
        if (domains[i] > 1)
            throw std::runtime_error("dataset: bad domain tag at sample " +
                                     std::to_string(i));
    }
    for (float x : features)
        if (!std::isfinite(x))
            throw std::runtime_error("dataset: non-finite feature value");
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    require_little_endian();
    Writer w(path);
    w.write_raw(kMagic, 8);
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u32(static_cast<std::uint32_t>(ds.t_len));
    w.u32(static_cast<std::uint32_t>(ds.n_bands));
    w.u32(static_cast<std::uint32_t>(ds.n_classes));
    w.u32(0); // reserved
    for (const auto& name : ds.class_names) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.write_raw(name.data(), name.size());
    }
    w.write_raw(ds.features.data(), ds.features.size() * sizeof(float));
    w.write_raw(ds.labels.data(), ds.labels.size() * sizeof(std::uint16_t));
    w.write_raw(ds.polygon_ids.data(), ds.polygon_ids.size() * sizeof(std::uint32_t));
    w.write_raw(ds.domains.data(), ds.domains.size());
    if (!w.out) throw std::runtime_error("write failure on '" + path + "'");
}

LabeledDataset load_dataset(const std::string& path) {
    require_little_endian();
    Reader r(path);
    char magic[8];
    r.read_raw(magic, 8, "magic");
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError("magic mismatch: expected SITSB001", 0);
    LabeledDataset ds;
    const std::uint32_t n = r.u32("sample count");
    ds.t_len = r.u32("timestamp count");
    ds.n_bands = r.u32("band count");
    ds.n_classes = r.u32("class count");
    r.u32("reserved field");
    ds.class_names.resize(ds.n_classes);
    for (auto& name : ds.class_names) {
        const std::uint16_t len = r.u16("class name length");
        name.resize(len);
        if (len) r.read_raw(name.data(), len, "class name");
    }
    ds.features.resize(static_cast<std::size_t>(n) * ds.t_len * ds.n_bands);
    const std::size_t feature_base = r.offset;
    if (!ds.features.empty())
        r.read_raw(ds.features.data(), ds.features.size() * sizeof(float),
                   "feature array");
    for (std::size_t i = 0; i < ds.features.size(); ++i)
        if (!std::isfinite(ds.features[i]))
            throw ParseError("non-finite feature value",
                             feature_base + i * sizeof(float));
    ds.labels.resize(n);
    const std::size_t label_base = r.offset;
    if (n) r.read_raw(ds.labels.data(), n * sizeof(std::uint16_t), "label array");
    for (std::size_t i = 0; i < n; ++i)
        if (ds.labels[i] >= ds.n_classes)
            throw ParseError("class label >= K at sample " + std::to_string(i),
                             label_base + i * sizeof(std::uint16_t));
    ds.polygon_ids.resize(n);
    if (n)
        r.read_raw(ds.polygon_ids.data(), n * sizeof(std::uint32_t),
                   "polygon id array");
    ds.domains.resize(n);
    const std::size_t domain_base = r.offset;
    if (n) r.read_raw(ds.domains.data(), n, "domain tag array");
    for (std::size_t i = 0; i < n; ++i)
        if (ds.domains[i] > 1)
            throw ParseError("domain tag not in {0,1} at sample " + std::to_string(i),
                             domain_base + i);
    return ds;
}

LabeledDataset subset(const LabeledDataset& ds,
                      const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.t_len = ds.t_len;
    out.n_bands = ds.n_bands;
    out.n_classes = ds.n_classes;
    out.class_names = ds.class_names;
    out.features.reserve(indices.size() * ds.sample_len());
    for (std::size_t i : indices) {
        const float* f = ds.features.data() + i * ds.sample_len();
        out.features.insert(out.features.end(), f, f + ds.sample_len());
        out.labels.push_back(ds.labels[i]);
        out.polygon_ids.push_back(ds.polygon_ids[i]);
        out.domains.push_back(ds.domains[i]);
    }
    return out;
}

LabeledDataset concatenate(const LabeledDataset& a, const LabeledDataset& b) {
    if (a.t_len != b.t_len || a.n_bands != b.n_bands ||
        a.n_classes != b.n_classes)
        throw std::runtime_error("concatenate: dataset metadata mismatch");
    LabeledDataset out = a;
    out.feature_reads = 0;
    out.features.insert(out.features.end(), b.features.begin(), b.features.end());
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    out.polygon_ids.insert(out.polygon_ids.end(), b.polygon_ids.begin(),
                           b.polygon_ids.end());
    out.domains.insert(out.domains.end(), b.domains.begin(), b.domains.end());
    return out;
}

} // namespace refed
