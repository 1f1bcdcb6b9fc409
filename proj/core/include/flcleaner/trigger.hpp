#pragma once
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "flcleaner/dataset.hpp"

namespace flcleaner {

/// Small labeled probe set held by the server; every client model is fed these
/// samples so its activation maps can be inspected.
struct TriggerSet {
    Dataset data;                     // materialized samples + labels
    std::vector<int> source_indices;  // rows of the originating test set

    std::size_t size() const { return data.size(); }
};

/// Seeded uniform sample of `size` test rows without replacement.
TriggerSet make_trigger_set(const Dataset& test_set, int size, std::uint64_t seed);

/// Pixel-pattern backdoor: masked positions are driven to full intensity and
/// the label is replaced by the target class. part_index selects one of the
/// four disjoint quarters used by the distributed variant.
struct BackdoorPattern {
    std::vector<std::pair<int, int>> mask;  // (row, col), full pattern
    int target_class = 0;
    std::optional<int> part_index;          // none = full pattern, else 0..3

    /// The positions this pattern instance actually touches.
    std::vector<std::pair<int, int>> active_positions(int pattern_side) const;
    int side = 10;
};

/// Solid side x side square anchored at the image's top-left corner.
BackdoorPattern square_pattern(int side, int target_class);

/// Poison sample `index` of `data` in place: masked pixels to 1.0, label to
/// the target class. Idempotent.
void apply_trigger(Dataset& data, std::size_t index, const BackdoorPattern& pattern);

} // namespace flcleaner
