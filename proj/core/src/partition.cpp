#include "flcleaner/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "flcleaner/errors.hpp"
#include "flcleaner/rng.hpp"

namespace flcleaner {

namespace {

std::vector<std::vector<int>> indices_by_class(const Dataset& data) {
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(data.num_classes));
    for (std::size_t i = 0; i < data.size(); ++i)
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(static_cast<int>(i));
    return by_class;
}

// Largest-remainder apportionment of `total` items to `shares` (which sum to 1).
std::vector<int> apportion(const std::vector<double>& shares, int total) {
    const std::size_t n = shares.size();
    std::vector<int> counts(n);
    std::vector<std::pair<double, std::size_t>> remainders(n);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = shares[i] * total;
        counts[i] = static_cast<int>(std::floor(exact));
        remainders[i] = {exact - counts[i], i};
        assigned += counts[i];
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;  // deterministic tie-break
    });
    for (int i = 0; i < total - assigned; ++i) ++counts[remainders[static_cast<std::size_t>(i)].second];
    return counts;
}

// A client may end up with nothing under extreme Dirichlet draws; move one
// sample from the largest client so the nonempty invariant holds.
void fix_empty_clients(Partition& p) {
    for (auto& empty : p.assignments) {
        if (!empty.empty()) continue;
        auto donor = std::max_element(p.assignments.begin(), p.assignments.end(),
                                      [](const auto& a, const auto& b) { return a.size() < b.size(); });
        if (donor->size() <= 1) throw PartitionError("not enough samples to give every client one");
        empty.push_back(donor->back());
        donor->pop_back();
    }
}

} // namespace

Partition partition_dirichlet(const Dataset& data, int num_clients, double alpha,
                              std::uint64_t seed) {
    if (num_clients < 1) throw PartitionError("need at least one client");
    if (alpha <= 0.0) throw PartitionError("dirichlet alpha must be positive");
    Partition p;
    p.seed = seed;
    p.assignments.assign(static_cast<std::size_t>(num_clients), {});
    auto by_class = indices_by_class(data);
    Prng rng(derive_seed(seed, 0x64697269ULL));
    for (std::size_t cls = 0; cls < by_class.size(); ++cls) {
        auto& pool = by_class[cls];
        if (pool.empty()) continue;
        rng.shuffle(pool);
        const auto shares = rng.dirichlet(alpha, static_cast<std::size_t>(num_clients));
        const auto counts = apportion(shares, static_cast<int>(pool.size()));
        std::size_t cursor = 0;
        for (int c = 0; c < num_clients; ++c) {
            auto& dst = p.assignments[static_cast<std::size_t>(c)];
            dst.insert(dst.end(), pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                       pool.begin() + static_cast<std::ptrdiff_t>(cursor + counts[static_cast<std::size_t>(c)]));
            cursor += static_cast<std::size_t>(counts[static_cast<std::size_t>(c)]);
        }
    }
    fix_empty_clients(p);
    return p;
}

long long inverse_law_count(double alpha, int gamma, int r, int c) {
    return static_cast<long long>(std::floor(alpha / (c + r))) + gamma;
}

Partition partition_inverse_law(const Dataset& data, int num_clients, double alpha, int gamma,
                                int r, std::uint64_t seed) {
    if (num_clients < 1) throw PartitionError("need at least one client");
    if (data.num_classes < 2) throw PartitionError("need at least two classes");
    Partition p;
    p.seed = seed;
    p.assignments.assign(static_cast<std::size_t>(num_clients), {});
    auto by_class = indices_by_class(data);
    Prng rng(derive_seed(seed, 0x696e76ULL));
    for (auto& pool : by_class) rng.shuffle(pool);
    // Remaining-sample cursors: samples are consumed from the back of each pool.
    for (int c = 0; c < num_clients; ++c) {
        const long long want = inverse_law_count(alpha, gamma, r, c);
        // Unordered pair of distinct classes.
        const int cls_a = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(data.num_classes)));
        int cls_b = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(data.num_classes - 1)));
        if (cls_b >= cls_a) ++cls_b;
        auto& pa = by_class[static_cast<std::size_t>(cls_a)];
        auto& pb = by_class[static_cast<std::size_t>(cls_b)];
        if (static_cast<long long>(pa.size() + pb.size()) < want)
            throw PartitionError("client " + std::to_string(c) + " demands " + std::to_string(want) +
                                 " samples but classes " + std::to_string(cls_a) + "," +
                                 std::to_string(cls_b) + " only have " +
                                 std::to_string(pa.size() + pb.size()) + " left");
        auto& dst = p.assignments[static_cast<std::size_t>(c)];
        dst.reserve(static_cast<std::size_t>(want));
        for (long long i = 0; i < want; ++i) {
            // Uniform draw over the merged remainder of the two chosen classes.
            const std::uint64_t pick = rng.uniform_int(static_cast<std::uint64_t>(pa.size() + pb.size()));
            auto& pool = pick < pa.size() ? pa : pb;
            dst.push_back(pool.back());
            pool.pop_back();
        }
    }
    fix_empty_clients(p);
    return p;
}

std::string partition_to_json(const Partition& p) {
    nlohmann::ordered_json j;
    for (std::size_t c = 0; c < p.assignments.size(); ++c)
        j[std::to_string(c)] = p.assignments[c];
    return j.dump(2);
}

} // namespace flcleaner
