#pragma once
#include <utility>
#include <vector>

namespace flcleaner {

// Brute-force reference implementations used by the test suites and exposed
// through `flcleaner oracle`. Intentionally independent of geomed.cpp and
// defense.cpp: they share no code with the paths they check.

/// Exhaustive 2-D grid search for the geometric median: evaluates the summed
/// distance objective at every `step`-spaced grid point of the bounding box.
/// Returns the best grid point and its objective value.
std::pair<std::vector<double>, double> geomed_grid_search(
    const std::vector<std::vector<double>>& points, double step = 1e-3);

/// First-gap reference for trust propagation: sorts the errors, scans every
/// adjacent gap of the sorted sequence and cuts at the first one exceeding
/// lambda * (max - min). Returns accepted positions in sorted order, as
/// indices into the input list.
std::vector<int> trust_first_gap_search(const std::vector<double>& epsilons, double lambda);

} // namespace flcleaner
