#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "flcleaner/nn.hpp"
#include "flcleaner/trigger.hpp"

namespace flcleaner {

// Adversary controllers for compromised clients: four byzantine transforms of
// outgoing weights and two backdoor training procedures. All are pure
// functions of (inputs, spec, seed).

enum class AttackKind {
    None,
    SignFlip,       // w' = -xi * w
    AdditiveNoise,  // w' = w + N(0, sigma) on a seeded coordinate subset
    SameValue,      // w' = c everywhere
    Scaling,        // w' = a * w
    Dba,            // poisoned training with one quarter of the pixel pattern
    Neurotoxin      // poisoned training restricted to small-gradient coordinates
};

AttackKind attack_kind_from_string(const std::string& name);
std::string attack_kind_to_string(AttackKind kind);
bool is_byzantine(AttackKind kind);
bool is_backdoor(AttackKind kind);

struct AttackSpec {
    AttackKind kind = AttackKind::None;
    double xi = 1.0;              // sign flip strength
    double sigma = 0.1;           // noise std deviation
    double noise_fraction = 1.0;  // fraction of coordinates perturbed
    double c = 0.01;              // constant weight value
    double a = 10.0;              // scaling factor
    double k_percent = 95.0;      // neurotoxin trainable share
    double poison_rate = 0.3;     // fraction of local samples poisoned
    BackdoorPattern pattern;      // dba/neurotoxin pixel pattern
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError on out-of-range parameters
};

/// Transform a trained update according to a byzantine attack spec.
WeightVector apply_byzantine(const WeightVector& weights, const AttackSpec& attack);

/// Update mask for the neurotoxin backdoor: exactly round(k% * dim) trainable
/// coordinates, chosen as the smallest gradient magnitudes (ties break toward
/// the lowest index). Returns 1 = trainable, 0 = frozen.
std::vector<std::uint8_t> neurotoxin_mask(const std::vector<double>& gradient, double k_percent);

struct TrainParams {
    int epochs = 2;
    double lr = 0.05;
    int batch_size = 32;
};

/// Backdoor client round: poison a seeded poison_rate share of the local view
/// (quarter pattern for dba, full pattern for neurotoxin), then train. The
/// neurotoxin variant freezes the largest-magnitude coordinates of the initial
/// full-batch gradient for the whole round.
WeightVector run_backdoor_client(const WeightVector& global_weights, const ModelSpec& spec,
                                 const DataView& local, const AttackSpec& attack,
                                 const TrainParams& params);

} // namespace flcleaner
