#pragma once
#include <cstdint>
#include <string>

#include "flcleaner/attacks.hpp"
#include "flcleaner/cvae.hpp"

namespace flcleaner {

enum class DefenseKind { FlCleaner, MeanThreshold, GeomedAgg, None };

DefenseKind defense_kind_from_string(const std::string& name);
std::string defense_kind_to_string(DefenseKind kind);

enum class PartitionScheme { Dirichlet, InverseLaw };

/// Everything a run needs. Every field has a default and can be overridden
/// from a flat `key = value` config file (TOML-compatible grammar).
struct ExperimentConfig {
    // data
    std::string dataset = "synthetic";  // synthetic | mnist | fashion_mnist
    std::string data_dir;               // IDX directory for mnist/fashion_mnist
    int train_limit = 10000;            // 0 = use everything
    int test_limit = 2000;
    int num_classes = 10;               // synthetic generator only

    // partition
    PartitionScheme partition = PartitionScheme::Dirichlet;
    double dirichlet_alpha = 1.0;
    double inverse_alpha = 2000.0;
    int inverse_gamma = 20;
    int inverse_r = 2;

    // population
    int num_clients = 20;
    double participation = 0.5;
    double attacker_fraction = 0.3;

    // attack
    AttackKind attack = AttackKind::None;
    double attack_xi = 1.0;
    double attack_sigma = 0.1;
    double attack_noise_fraction = 1.0;
    double attack_c = 0.01;
    double attack_a = 10.0;
    double attack_k_percent = 95.0;
    double attack_poison_rate = 0.3;
    int attack_target_class = 0;
    int attack_pattern_size = 10;

    // defense
    DefenseKind defense = DefenseKind::FlCleaner;
    double lambda = 0.3;
    std::string layer_mask = "all";  // "all" or comma list of layer indices

    // CVAE bootstrap
    int trigger_size = 250;
    int cvae_warmup_epochs = 10;
    int cvae_harvest_epochs = 10;
    int cvae_epochs = 20;
    double cvae_beta_initial = 0.0;
    double cvae_beta_increment = 0.5;
    int cvae_beta_step_epoch = 10;
    int cvae_latent_dim = 16;
    double cvae_lr = 0.01;
    int cvae_batch_size = 64;

    // model + local training
    std::string model = "mlp";  // mlp | cnn
    int mlp_hidden = 128;
    int rounds = 15;
    int local_epochs = 2;
    double learning_rate = 0.05;
    int batch_size = 32;

    // seeds (data, init, selection, attack streams are independent)
    std::uint64_t seed_data = 1;
    std::uint64_t seed_init = 2;
    std::uint64_t seed_selection = 3;
    std::uint64_t seed_attack = 4;

    BetaSchedule beta_schedule() const {
        return {cvae_beta_initial, cvae_beta_increment, cvae_beta_step_epoch};
    }

    /// Throws ConfigError if any invariant is violated (attacker_fraction must
    /// stay below 0.5, participation in (0,1], ...).
    void validate() const;

    /// Canonical key=value dump of every field, used for summary echoes and
    /// the run id.
    std::string canonical_echo() const;
};

/// Parse `key = value` text. Unknown keys and malformed values raise
/// ConfigError. The result is validated.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a hash of the canonical echo, as 16 hex chars.
std::string run_id(const ExperimentConfig& cfg);

} // namespace flcleaner
