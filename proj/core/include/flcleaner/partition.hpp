#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "flcleaner/dataset.hpp"

namespace flcleaner {

/// Per-client sample index lists into a source dataset. No index is assigned
/// twice and every client list is nonempty.
struct Partition {
    std::vector<std::vector<int>> assignments;
    std::uint64_t seed = 0;

    std::size_t num_clients() const { return assignments.size(); }
    const std::vector<int>& client(std::size_t c) const { return assignments[c]; }
};

/// Label-skew split: for each class, a symmetric Dirichlet(alpha) vector over
/// clients decides the share of that class's samples each client receives
/// (largest-remainder rounding, so class totals are conserved exactly).
Partition partition_dirichlet(const Dataset& data, int num_clients, double alpha,
                              std::uint64_t seed);

/// Quantity-skew split: client c draws floor(alpha/(c+r)) + gamma samples
/// without replacement from two seeded-randomly chosen classes.
Partition partition_inverse_law(const Dataset& data, int num_clients, double alpha, int gamma,
                                int r, std::uint64_t seed);

/// Sample count the inverse-law scheme assigns to client c.
long long inverse_law_count(double alpha, int gamma, int r, int c);

/// JSON object {"0": [indices...], "1": [...]} for audit dumps.
std::string partition_to_json(const Partition& p);

} // namespace flcleaner
