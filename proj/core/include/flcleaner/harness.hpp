#pragma once
#include <optional>
#include <set>
#include <vector>

#include "flcleaner/config.hpp"
#include "flcleaner/defense.hpp"

namespace flcleaner {

struct RoundReport {
    int round = 0;
    double acc = 0.0;
    double recall = 0.0;
    double fpr = 0.0;
    double asr = 0.0;
    std::vector<int> benign_ids;
    std::vector<int> blocked_ids;
    std::vector<ClientScore> epsilons;  // per scored client
    double delta = 0.0;
    long long wall_ms = 0;
    int attackers_selected = 0;  // 0 means the recall value is the convention
    int geomed_warnings = 0;     // geomed iterations that hit max_iters
};

struct RunResult {
    ExperimentConfig cfg;
    std::vector<RoundReport> rounds;
    WeightVector final_global;
    std::optional<CvaeState> cvae;  // present for scoring defenses
    long long total_ms = 0;
};

struct Metrics {
    double acc = 0.0, recall = 0.0, fpr = 0.0, asr = 0.0;
};

/// Seeded selection of `count` client ids for a round, ascending order.
std::vector<int> select_clients(int num_clients, int count, std::uint64_t selection_seed,
                                int round);

/// Detection + task metrics for one round. `attacker_ids` are the malicious
/// clients among the selected set; recall reports 1.0 by convention when none
/// were selected. ASR is only computed when `pattern` is non-null, over
/// non-target-class rows of `asr_view` with the full pattern applied.
Metrics compute_metrics(const FilterDecision& decision, const std::set<int>& attacker_ids,
                        const WeightVector& global, const ModelSpec& spec,
                        const DataView& clean_test, const DataView& asr_view,
                        const BackdoorPattern* pattern);

/// The full round loop: CVAE bootstrap (for scoring defenses), then per round
/// client selection, local training or attack controllers, scoring/filtering,
/// FedAvg over accepted clients, metric computation. Deterministic for a
/// fixed config, including all four seeds.
RunResult run_experiment(const ExperimentConfig& cfg);

/// Parse the layer_mask config string ("all" or comma-separated indices).
LayerMask parse_layer_mask(const std::string& text, const ModelSpec& spec);

/// Model spec named by the config (mlp/cnn) for a dataset shape.
ModelSpec model_from_config(const ExperimentConfig& cfg, const Shape3& input_shape);

} // namespace flcleaner
