#pragma once
#include <cmath>
#include <vector>

#include "flcleaner/dataset.hpp"
#include "flcleaner/nn.hpp"
#include "flcleaner/rng.hpp"

namespace testutil {

/// Tiny random labeled dataset with the given sample size and class count.
inline flcleaner::Dataset random_dataset(int count, int sample_size, int classes,
                                         std::uint64_t seed) {
    flcleaner::Dataset ds;
    ds.shape = {1, 1, sample_size};
    ds.num_classes = classes;
    ds.pixels.resize(static_cast<std::size_t>(count) * sample_size);
    ds.labels.resize(static_cast<std::size_t>(count));
    flcleaner::Prng rng(seed);
    for (auto& p : ds.pixels) p = rng.uniform01();
    for (auto& l : ds.labels) l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes)));
    return ds;
}

inline flcleaner::Dataset random_image_dataset(int count, int h, int w, int classes,
                                               std::uint64_t seed) {
    flcleaner::Dataset ds = random_dataset(count, h * w, classes, seed);
    ds.shape = {1, h, w};
    return ds;
}

/// Central finite difference of the mean cross-entropy at coordinate `idx`.
inline double fd_gradient(const flcleaner::WeightVector& weights, const flcleaner::ModelSpec& spec,
                          const flcleaner::DataView& view, std::size_t idx, double eps = 1e-5) {
    flcleaner::WeightVector plus = weights, minus = weights;
    plus.values[idx] += eps;
    minus.values[idx] -= eps;
    const double lp = flcleaner::loss_and_gradient(plus, spec, view).first;
    const double lm = flcleaner::loss_and_gradient(minus, spec, view).first;
    return (lp - lm) / (2.0 * eps);
}

/// Relative error with an absolute floor for near-zero gradients.
inline double rel_err(double got, double want) {
    const double denom = std::max({std::fabs(got), std::fabs(want), 1e-8});
    return std::fabs(got - want) / denom;
}

} // namespace testutil
