#pragma once
#include <span>
#include <vector>

namespace flcleaner {

// Geometric median of equal-dimension points by Weiszfeld iteration, used to
// normalize activation maps and as a baseline aggregator. Point weights are
// optional and nonnegative.

struct GeomedResult {
    std::vector<double> point;
    int iterations = 0;
    bool converged = false;
};

/// Sum of weighted Euclidean distances from m to the points.
double geomed_objective(const std::vector<std::span<const double>>& points,
                        const std::vector<double>* weights, std::span<const double> m);

/// One smoothed Weiszfeld update from `current` (epsilon 1e-12 in the
/// denominators, so coinciding with a data point is harmless).
std::vector<double> weiszfeld_step(const std::vector<std::span<const double>>& points,
                                   const std::vector<double>* weights,
                                   std::span<const double> current);

/// Iterate from the coordinate-wise (weighted) mean until the step norm drops
/// below tol or max_iters is reached. A single point is returned exactly.
GeomedResult geometric_median(const std::vector<std::span<const double>>& points,
                              const std::vector<double>* weights = nullptr, double tol = 1e-6,
                              int max_iters = 200);

/// Convenience overload for owned vectors.
GeomedResult geometric_median(const std::vector<std::vector<double>>& points,
                              const std::vector<double>* weights = nullptr, double tol = 1e-6,
                              int max_iters = 200);

} // namespace flcleaner
