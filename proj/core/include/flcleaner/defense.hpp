#pragma once
#include <span>
#include <vector>

#include "flcleaner/cvae.hpp"
#include "flcleaner/nn.hpp"
#include "flcleaner/trigger.hpp"

namespace flcleaner {

// The filtering layer: per-client activation-map scoring through the CVAE,
// trust-propagation clustering over the scores, a mean-threshold ablation
// filter, and the two aggregators (weighted FedAvg, geometric median).

struct ClientScore {
    int client_id = 0;
    double epsilon = 0.0;  // mean reconstruction error over trigger samples
};

struct ScoreSet {
    std::vector<ClientScore> scores;   // one per scored client, input order
    int geomed_nonconverged = 0;       // trigger samples whose geomed hit max_iters
};

/// sigmoid(map - geomed(maps)) for one trigger sample across clients. Exposed
/// so the normalization step can be tested in isolation.
std::vector<std::vector<double>> normalize_against_geomed(
    const std::vector<std::span<const double>>& client_maps, int* nonconverged = nullptr);

/// For every trigger sample: capture each client's activation map, normalize
/// against the cross-client geometric median, and score each client by the
/// CVAE reconstruction error conditioned on the sample label. A client's
/// epsilon is the mean over trigger samples. Needs >= 2 clients.
ScoreSet score_clients(const std::vector<WeightVector>& client_models,
                       const std::vector<int>& client_ids, const ModelSpec& spec,
                       const TriggerSet& trigger, const LayerMask& mask, const CvaeState& cvae);

struct FilterDecision {
    std::vector<int> benign_ids;   // ascending-score order
    std::vector<int> blocked_ids;  // ascending-score order
    double delta = 0.0;            // gap threshold used this round
    double lambda = 0.0;
};

/// Sorted-error greedy clustering: delta = lambda * (max - min); accept the
/// lowest-error client, then walk the sorted list accepting the next client
/// while its error is within delta of the last accepted one. Stops for good
/// at the first larger gap; everything after is blocked.
FilterDecision trust_propagate(const std::vector<ClientScore>& scores, double lambda);

/// Ablation comparator: accept clients strictly below the mean error (all
/// clients when every error is equal). delta reports the mean.
FilterDecision filter_mean_threshold(const std::vector<ClientScore>& scores);

/// Coordinate-wise mean weighted by local dataset sizes.
WeightVector aggregate_fedavg(const std::vector<WeightVector>& models,
                              const std::vector<long long>& dataset_sizes);

/// Geometric median of the weight vectors (baseline aggregator).
WeightVector aggregate_geomed(const std::vector<WeightVector>& models, double tol = 1e-6,
                              int max_iters = 200, bool* converged = nullptr);

} // namespace flcleaner
