#include "flcleaner/trigger.hpp"

#include "flcleaner/errors.hpp"
#include "flcleaner/rng.hpp"

namespace flcleaner {

TriggerSet make_trigger_set(const Dataset& test_set, int size, std::uint64_t seed) {
    if (size < 1) throw Error("trigger set size must be >= 1");
    if (static_cast<std::size_t>(size) > test_set.size())
        throw Error("trigger set size " + std::to_string(size) + " exceeds test set size " +
                    std::to_string(test_set.size()));
    Prng rng(derive_seed(seed, 0x74726967ULL));
    TriggerSet ts;
    ts.source_indices = rng.sample_without_replacement(static_cast<int>(test_set.size()), size);
    DataView view{&test_set, ts.source_indices};
    ts.data = materialize(view);
    return ts;
}

std::vector<std::pair<int, int>> BackdoorPattern::active_positions(int pattern_side) const {
    if (!part_index) return mask;
    // Quarters tile the square: [0,s/2) x [0,s/2), [0,s/2) x [s/2,s), ...
    const int half = pattern_side / 2;
    const int quarter = *part_index;
    std::vector<std::pair<int, int>> out;
    for (const auto& [r, c] : mask) {
        const int qr = r >= half ? 1 : 0;
        const int qc = c >= half ? 1 : 0;
        if (qr * 2 + qc == quarter) out.emplace_back(r, c);
    }
    return out;
}

BackdoorPattern square_pattern(int side, int target_class) {
    BackdoorPattern p;
    p.side = side;
    p.target_class = target_class;
    p.mask.reserve(static_cast<std::size_t>(side) * side);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) p.mask.emplace_back(r, c);
    return p;
}

void apply_trigger(Dataset& data, std::size_t index, const BackdoorPattern& pattern) {
    double* px = data.sample_mut(index);
    const int w = data.shape.w;
    for (const auto& [r, c] : pattern.active_positions(pattern.side)) {
        if (r < 0 || r >= data.shape.h || c < 0 || c >= w)
            throw Error("backdoor pattern position (" + std::to_string(r) + "," +
                        std::to_string(c) + ") outside image bounds");
        px[static_cast<std::size_t>(r) * w + c] = 1.0;
    }
    data.labels[index] = pattern.target_class;
}

} // namespace flcleaner
