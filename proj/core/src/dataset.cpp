#include "flcleaner/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "flcleaner/errors.hpp"
#include "flcleaner/rng.hpp"

namespace flcleaner {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw IdxError(IdxError::Kind::Truncated, "truncated header in " + path);
    return (static_cast<std::uint32_t>(buf[0]) << 24) | (static_cast<std::uint32_t>(buf[1]) << 16) |
           (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                                  static_cast<unsigned char>((v >> 16) & 0xff),
                                  static_cast<unsigned char>((v >> 8) & 0xff),
                                  static_cast<unsigned char>(v & 0xff)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

} // namespace

DataView full_view(const Dataset& data) {
    DataView v;
    v.data = &data;
    v.indices.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) v.indices[i] = static_cast<int>(i);
    return v;
}

Dataset materialize(const DataView& view) {
    Dataset out;
    out.shape = view.data->shape;
    out.num_classes = view.data->num_classes;
    const std::size_t px = static_cast<std::size_t>(out.shape.size());
    out.pixels.resize(view.size() * px);
    out.labels.resize(view.size());
    for (std::size_t i = 0; i < view.size(); ++i) {
        const double* src = view.sample(i);
        std::copy(src, src + px, out.pixels.begin() + i * px);
        out.labels[i] = view.label(i);
    }
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IdxError(IdxError::Kind::Io, "cannot open " + images_path);
    std::ifstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw IdxError(IdxError::Kind::Io, "cannot open " + labels_path);

    const std::uint32_t img_magic = read_u32_be(img, images_path);
    if (img_magic != kImagesMagic)
        throw IdxError(IdxError::Kind::BadMagic, "bad image magic in " + images_path);
    const std::uint32_t n_images = read_u32_be(img, images_path);
    const std::uint32_t rows = read_u32_be(img, images_path);
    const std::uint32_t cols = read_u32_be(img, images_path);

    const std::uint32_t lbl_magic = read_u32_be(lbl, labels_path);
    if (lbl_magic != kLabelsMagic)
        throw IdxError(IdxError::Kind::BadMagic, "bad label magic in " + labels_path);
    const std::uint32_t n_labels = read_u32_be(lbl, labels_path);

    if (n_images != n_labels)
        throw IdxError(IdxError::Kind::CountMismatch,
                       std::to_string(n_images) + " images vs " + std::to_string(n_labels) +
                           " labels");

    Dataset ds;
    ds.shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
    const std::size_t px = rows * static_cast<std::size_t>(cols);
    ds.pixels.resize(n_images * px);
    ds.labels.resize(n_images);

    std::vector<unsigned char> raw(px);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(px));
        if (!img)
            throw IdxError(IdxError::Kind::Truncated,
                           images_path + " ends at image " + std::to_string(i));
        for (std::size_t j = 0; j < px; ++j)
            ds.pixels[i * px + j] = static_cast<double>(raw[j]) / 255.0;
    }
    std::vector<unsigned char> lab(n_labels);
    lbl.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(n_labels));
    if (!lbl) throw IdxError(IdxError::Kind::Truncated, labels_path + " label block truncated");
    int max_label = 0;
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        ds.labels[i] = lab[i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = std::max(10, max_label + 1);
    return ds;
}

void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path) {
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IdxError(IdxError::Kind::Io, "cannot open " + images_path);
    std::ofstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw IdxError(IdxError::Kind::Io, "cannot open " + labels_path);

    write_u32_be(img, kImagesMagic);
    write_u32_be(img, static_cast<std::uint32_t>(data.size()));
    write_u32_be(img, static_cast<std::uint32_t>(data.shape.h));
    write_u32_be(img, static_cast<std::uint32_t>(data.shape.w));
    const std::size_t px = static_cast<std::size_t>(data.shape.size());
    std::vector<unsigned char> raw(px);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double* s = data.sample(i);
        for (std::size_t j = 0; j < px; ++j) {
            const double v = std::clamp(s[j], 0.0, 1.0);
            raw[j] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        img.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(px));
    }
    write_u32_be(lbl, kLabelsMagic);
    write_u32_be(lbl, static_cast<std::uint32_t>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const unsigned char b = static_cast<unsigned char>(data.labels[i]);
        lbl.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!img || !lbl) throw IdxError(IdxError::Kind::Io, "write failed");
}

namespace {

constexpr int kSide = 28;

struct Stroke {
    double r0, c0, r1, c1;
};

void stamp(std::vector<double>& canvas, double r, double c, double intensity) {
    // Soft disc of radius ~1.5px.
    const int rlo = std::max(0, static_cast<int>(std::floor(r - 2)));
    const int rhi = std::min(kSide - 1, static_cast<int>(std::ceil(r + 2)));
    const int clo = std::max(0, static_cast<int>(std::floor(c - 2)));
    const int chi = std::min(kSide - 1, static_cast<int>(std::ceil(c + 2)));
    for (int y = rlo; y <= rhi; ++y)
        for (int x = clo; x <= chi; ++x) {
            const double d2 = (y - r) * (y - r) + (x - c) * (x - c);
            const double v = intensity * std::exp(-d2 / 1.1);
            double& px = canvas[static_cast<std::size_t>(y) * kSide + x];
            px = std::max(px, v);
        }
}

void draw_stroke(std::vector<double>& canvas, const Stroke& s, double intensity) {
    const double len = std::hypot(s.r1 - s.r0, s.c1 - s.c0);
    const int steps = std::max(2, static_cast<int>(len * 2.5));
    for (int t = 0; t <= steps; ++t) {
        const double u = static_cast<double>(t) / steps;
        stamp(canvas, s.r0 + u * (s.r1 - s.r0), s.c0 + u * (s.c1 - s.c0), intensity);
    }
}

std::vector<Stroke> class_prototype(int cls, std::uint64_t seed) {
    Prng rng(derive_seed(seed, 0x70726f74ULL, static_cast<std::uint64_t>(cls)));
    const int n = 4 + static_cast<int>(rng.uniform_int(3));  // 4..6 strokes
    std::vector<Stroke> strokes;
    strokes.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Stroke s;
        s.r0 = 5.0 + rng.uniform01() * 18.0;
        s.c0 = 5.0 + rng.uniform01() * 18.0;
        // Bias toward medium-length strokes so shapes stay legible.
        const double ang = rng.uniform01() * 6.283185307179586;
        const double len = 6.0 + rng.uniform01() * 10.0;
        s.r1 = std::clamp(s.r0 + len * std::sin(ang), 3.0, 25.0);
        s.c1 = std::clamp(s.c0 + len * std::cos(ang), 3.0, 25.0);
        strokes.push_back(s);
    }
    return strokes;
}

} // namespace

Dataset synthetic_dataset(int per_class_count, int num_classes, std::uint64_t seed) {
    Dataset ds;
    ds.shape = {1, kSide, kSide};
    ds.num_classes = num_classes;
    const std::size_t total = static_cast<std::size_t>(per_class_count) * num_classes;
    ds.pixels.assign(total * kSide * kSide, 0.0);
    ds.labels.resize(total);

    std::vector<std::vector<Stroke>> protos;
    protos.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) protos.push_back(class_prototype(c, seed));

    std::vector<double> canvas(kSide * kSide);
    std::size_t out = 0;
    // Class-interleaved order so any prefix of the dataset stays balanced.
    for (int i = 0; i < per_class_count; ++i) {
        for (int c = 0; c < num_classes; ++c, ++out) {
            Prng rng(derive_seed(seed, static_cast<std::uint64_t>(c) + 1,
                                 static_cast<std::uint64_t>(i) + 1));
            std::fill(canvas.begin(), canvas.end(), 0.0);
            const double dr = (rng.uniform01() - 0.5) * 6.0;   // +-3 px translation
            const double dc = (rng.uniform01() - 0.5) * 6.0;
            const double gain = 0.7 + 0.3 * rng.uniform01();
            for (const Stroke& proto : protos[static_cast<std::size_t>(c)]) {
                if (rng.uniform01() < 0.12) continue;  // occasional dropped stroke
                Stroke s = proto;
                s.r0 += dr + (rng.uniform01() - 0.5) * 2.5;
                s.c0 += dc + (rng.uniform01() - 0.5) * 2.5;
                s.r1 += dr + (rng.uniform01() - 0.5) * 2.5;
                s.c1 += dc + (rng.uniform01() - 0.5) * 2.5;
                draw_stroke(canvas, s, gain);
            }
            double* px = ds.pixels.data() + out * static_cast<std::size_t>(kSide * kSide);
            for (int j = 0; j < kSide * kSide; ++j) {
                const double noisy = canvas[static_cast<std::size_t>(j)] + 0.06 * rng.gaussian();
                px[j] = std::clamp(noisy, 0.0, 1.0);
            }
            ds.labels[out] = c;
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> synthetic_split(int train_count, int test_count, int num_classes,
                                            std::uint64_t seed) {
    const int total = train_count + test_count;
    const int per_class = (total + num_classes - 1) / num_classes;
    const Dataset corpus = synthetic_dataset(per_class, num_classes, seed);

    DataView train_view{&corpus, {}};
    DataView test_view{&corpus, {}};
    train_view.indices.reserve(static_cast<std::size_t>(train_count));
    test_view.indices.reserve(static_cast<std::size_t>(test_count));
    for (int i = 0; i < train_count; ++i) train_view.indices.push_back(i);
    for (int i = train_count; i < train_count + test_count; ++i) test_view.indices.push_back(i);
    return {materialize(train_view), materialize(test_view)};
}

} // namespace flcleaner
