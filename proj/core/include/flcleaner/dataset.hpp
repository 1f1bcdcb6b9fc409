#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace flcleaner {

struct Shape3 {
    int c = 1, h = 0, w = 0;
    int size() const { return c * h * w; }
    bool operator==(const Shape3&) const = default;
};

/// Labeled image set stored as one contiguous buffer of pixel values in [0,1].
struct Dataset {
    std::vector<double> pixels;  // size() * shape.size()
    std::vector<int> labels;
    Shape3 shape{1, 28, 28};
    int num_classes = 10;

    std::size_t size() const { return labels.size(); }
    const double* sample(std::size_t i) const {
        return pixels.data() + i * static_cast<std::size_t>(shape.size());
    }
    double* sample_mut(std::size_t i) {
        return pixels.data() + i * static_cast<std::size_t>(shape.size());
    }
};

/// A dataset plus an index ordering: a client partition, an evaluation subset,
/// or a per-round shuffled traversal. Does not own the data.
struct DataView {
    const Dataset* data = nullptr;
    std::vector<int> indices;

    std::size_t size() const { return indices.size(); }
    const double* sample(std::size_t i) const {
        return data->sample(static_cast<std::size_t>(indices[i]));
    }
    int label(std::size_t i) const { return data->labels[static_cast<std::size_t>(indices[i])]; }
};

DataView full_view(const Dataset& data);

/// Copy the rows selected by a view into a standalone dataset (used when a
/// client needs to modify its local samples).
Dataset materialize(const DataView& view);

/// Load an IDX image/label file pair (the MNIST distribution format).
/// Pixels are scaled to [0,1]. Throws IdxError with a distinct kind for a bad
/// magic number, a truncated file or an image/label count mismatch.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Write a dataset back out as an IDX pair (bit-exact format round-trip;
/// pixel values are quantized to bytes).
void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path);

/// Deterministic 10-class 28x28 drawing-like corpus: per-class seeded stroke
/// prototypes rendered with per-sample translation, stroke jitter, elastic
/// intensity modulation and pixel noise. Classes are balanced and interleaved,
/// so any prefix is balanced too. Stands in for MNIST-style data in
/// self-contained runs.
Dataset synthetic_dataset(int per_class_count, int num_classes, std::uint64_t seed);

/// One corpus split into disjoint train/test parts that share the same class
/// prototypes (samples differ in their per-sample variation).
std::pair<Dataset, Dataset> synthetic_split(int train_count, int test_count, int num_classes,
                                            std::uint64_t seed);

} // namespace flcleaner
