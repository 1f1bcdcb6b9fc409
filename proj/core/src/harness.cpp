#include "flcleaner/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "flcleaner/errors.hpp"
#include "flcleaner/parallel.hpp"
#include "flcleaner/partition.hpp"
#include "flcleaner/rng.hpp"

namespace flcleaner {

namespace {

using Clock = std::chrono::steady_clock;

long long ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

Dataset truncate(Dataset ds, int limit) {
    if (limit <= 0 || static_cast<std::size_t>(limit) >= ds.size()) return ds;
    DataView v;
    v.data = &ds;
    v.indices.resize(static_cast<std::size_t>(limit));
    for (int i = 0; i < limit; ++i) v.indices[static_cast<std::size_t>(i)] = i;
    return materialize(v);
}

std::pair<Dataset, Dataset> load_data(const ExperimentConfig& cfg) {
    if (cfg.dataset == "synthetic") {
        return synthetic_split(cfg.train_limit > 0 ? cfg.train_limit : 10000,
                               cfg.test_limit > 0 ? cfg.test_limit : 2000, cfg.num_classes,
                               derive_seed(cfg.seed_data, 0x636f7270ULL));
    }
    // mnist / fashion_mnist share the IDX layout and file names.
    const std::string dir = cfg.data_dir;
    Dataset train = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    Dataset test = load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    return {truncate(std::move(train), cfg.train_limit), truncate(std::move(test), cfg.test_limit)};
}

Partition build_partition(const ExperimentConfig& cfg, const Dataset& train) {
    if (cfg.partition == PartitionScheme::Dirichlet)
        return partition_dirichlet(train, cfg.num_clients, cfg.dirichlet_alpha, cfg.seed_data);
    return partition_inverse_law(train, cfg.num_clients, cfg.inverse_alpha, cfg.inverse_gamma,
                                 cfg.inverse_r, cfg.seed_data);
}

AttackSpec attack_from_config(const ExperimentConfig& cfg) {
    AttackSpec a;
    a.kind = cfg.attack;
    a.xi = cfg.attack_xi;
    a.sigma = cfg.attack_sigma;
    a.noise_fraction = cfg.attack_noise_fraction;
    a.c = cfg.attack_c;
    a.a = cfg.attack_a;
    a.k_percent = cfg.attack_k_percent;
    a.poison_rate = cfg.attack_poison_rate;
    a.pattern = square_pattern(cfg.attack_pattern_size, cfg.attack_target_class);
    return a;
}

} // namespace

std::vector<int> select_clients(int num_clients, int count, std::uint64_t selection_seed,
                                int round) {
    Prng rng(derive_seed(selection_seed, 0x73656cULL, static_cast<std::uint64_t>(round)));
    auto picked = rng.sample_without_replacement(num_clients, count);
    std::sort(picked.begin(), picked.end());
    return picked;
}

LayerMask parse_layer_mask(const std::string& text, const ModelSpec& spec) {
    LayerMask mask = full_layer_mask(spec);
    if (text == "all" || text.empty()) return mask;
    std::fill(mask.begin(), mask.end(), false);
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string tok = text.substr(pos, comma - pos);
        try {
            const int idx = std::stoi(tok);
            if (idx < 0 || static_cast<std::size_t>(idx) >= mask.size())
                throw ConfigError("layer_mask index " + tok + " out of range");
            mask[static_cast<std::size_t>(idx)] = true;
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
            throw ConfigError("layer_mask: cannot parse '" + tok + "'");
        }
        pos = comma + 1;
    }
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
        throw ConfigError("layer_mask selects no layers");
    return mask;
}

ModelSpec model_from_config(const ExperimentConfig& cfg, const Shape3& input_shape) {
    if (cfg.model == "cnn") return cnn_spec(input_shape, cfg.num_classes, cfg.seed_init);
    ModelSpec spec = mlp_spec(input_shape.size(), cfg.mlp_hidden, cfg.num_classes, cfg.seed_init);
    return spec;
}

Metrics compute_metrics(const FilterDecision& decision, const std::set<int>& attacker_ids,
                        const WeightVector& global, const ModelSpec& spec,
                        const DataView& clean_test, const DataView& asr_view,
                        const BackdoorPattern* pattern) {
    Metrics m;
    int blocked_attackers = 0, blocked_benign = 0;
    for (int id : decision.blocked_ids) {
        if (attacker_ids.count(id))
            ++blocked_attackers;
        else
            ++blocked_benign;
    }
    const int attackers_present = static_cast<int>(attacker_ids.size());
    const int total = static_cast<int>(decision.benign_ids.size() + decision.blocked_ids.size());
    const int benign_present = total - attackers_present;

    m.recall = attackers_present > 0
                   ? static_cast<double>(blocked_attackers) / attackers_present
                   : 1.0;  // convention: nothing to detect
    m.fpr = benign_present > 0 ? static_cast<double>(blocked_benign) / benign_present : 0.0;
    m.acc = evaluate(global, spec, clean_test);

    if (pattern && asr_view.size() > 0) {
        Dataset triggered = materialize(asr_view);
        BackdoorPattern full = *pattern;
        full.part_index.reset();
        for (std::size_t i = 0; i < triggered.size(); ++i) apply_trigger(triggered, i, full);
        const DataView tv = full_view(triggered);
        const ForwardResult res = forward(global, spec, *tv.data, tv.indices);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < tv.size(); ++i) {
            const double* p = res.sample_probs(static_cast<int>(i));
            int best = 0;
            for (int c = 1; c < res.classes; ++c)
                if (p[c] > p[best]) best = c;
            if (best == pattern->target_class) ++hits;
        }
        m.asr = static_cast<double>(hits) / static_cast<double>(tv.size());
    }
    return m;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t_start = Clock::now();

    RunResult result;
    result.cfg = cfg;

    auto [train, test] = load_data(cfg);
    const TriggerSet trigger = make_trigger_set(test, cfg.trigger_size, cfg.seed_data);

    // Accuracy is always measured off the trigger rows; the backdoor success
    // view additionally drops true-target-class rows.
    std::vector<bool> in_trigger(test.size(), false);
    for (int idx : trigger.source_indices) in_trigger[static_cast<std::size_t>(idx)] = true;
    DataView clean_test{&test, {}};
    DataView asr_view{&test, {}};
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (in_trigger[i]) continue;
        clean_test.indices.push_back(static_cast<int>(i));
        if (test.labels[i] != cfg.attack_target_class)
            asr_view.indices.push_back(static_cast<int>(i));
    }
    if (clean_test.indices.empty()) throw ConfigError("trigger set consumed the whole test set");

    const Partition partition = build_partition(cfg, train);
    const ModelSpec spec = model_from_config(cfg, train.shape);
    const LayerMask mask = parse_layer_mask(cfg.layer_mask, spec);
    WeightVector global = init_model(spec);

    // Attacker roster and, for the distributed backdoor, quarter assignment
    // by rank among the attackers.
    const int n_attackers = static_cast<int>(std::floor(cfg.attacker_fraction * cfg.num_clients));
    std::set<int> attacker_ids;
    if (cfg.attack != AttackKind::None && n_attackers > 0) {
        Prng rng(derive_seed(cfg.seed_attack, 0x726f6c65ULL));
        for (int id : rng.sample_without_replacement(cfg.num_clients, n_attackers))
            attacker_ids.insert(id);
    }
    std::vector<int> attacker_rank(static_cast<std::size_t>(cfg.num_clients), -1);
    {
        int rank = 0;
        for (int id : attacker_ids) attacker_rank[static_cast<std::size_t>(id)] = rank++;
    }
    const AttackSpec attack_base = attack_from_config(cfg);

    const bool scoring_defense =
        cfg.defense == DefenseKind::FlCleaner || cfg.defense == DefenseKind::MeanThreshold;
    if (scoring_defense) {
        const CvaeTrainingSet ts = build_training_set(
            global, spec, trigger, cfg.cvae_warmup_epochs, cfg.cvae_harvest_epochs,
            cfg.learning_rate, cfg.batch_size, mask, derive_seed(cfg.seed_init, 0x736572ULL));
        result.cvae = train_cvae(ts, cfg.cvae_epochs, cfg.beta_schedule(), cfg.cvae_lr,
                                 cfg.cvae_batch_size, cfg.cvae_latent_dim,
                                 derive_seed(cfg.seed_init, 0x637661ULL));
    }

    const int per_round =
        std::max(1, static_cast<int>(std::ceil(cfg.participation * cfg.num_clients)));
    const TrainParams params{cfg.local_epochs, cfg.learning_rate, cfg.batch_size};

    for (int round = 1; round <= cfg.rounds; ++round) {
        const auto t_round = Clock::now();
        try {
            const std::vector<int> selected =
                select_clients(cfg.num_clients, per_round, cfg.seed_selection, round);

            // Local training / attack controllers, one independent slot per client.
            std::vector<WeightVector> models(selected.size());
            parallel_for(selected.size(), [&](std::size_t i) {
                const int id = selected[i];
                std::vector<int> order = partition.client(static_cast<std::size_t>(id));
                Prng shuffle_rng(derive_seed(cfg.seed_data, 0x6f726472ULL,
                                             static_cast<std::uint64_t>(round),
                                             static_cast<std::uint64_t>(id)));
                shuffle_rng.shuffle(order);
                const DataView local{&train, std::move(order)};

                const bool malicious = attacker_ids.count(id) > 0;
                if (!malicious || cfg.attack == AttackKind::None) {
                    models[i] = train_local(global, spec, local, params.epochs, params.lr,
                                            params.batch_size);
                    return;
                }
                AttackSpec attack = attack_base;
                attack.seed = derive_seed(cfg.seed_attack, static_cast<std::uint64_t>(round),
                                          static_cast<std::uint64_t>(id));
                if (is_backdoor(attack.kind)) {
                    if (attack.kind == AttackKind::Dba)
                        attack.pattern.part_index = attacker_rank[static_cast<std::size_t>(id)] % 4;
                    models[i] = run_backdoor_client(global, spec, local, attack, params);
                    return;
                }
                if (attack.kind == AttackKind::SameValue) {
                    // The outgoing vector is the constant c regardless of training.
                    models[i] = apply_byzantine(global, attack);
                    return;
                }
                const WeightVector trained =
                    train_local(global, spec, local, params.epochs, params.lr, params.batch_size);
                models[i] = apply_byzantine(trained, attack);
            });

            // Filtering.
            RoundReport report;
            report.round = round;
            FilterDecision decision;
            if (scoring_defense) {
                const ScoreSet scores = score_clients(models, selected, spec, trigger, mask,
                                                      *result.cvae);
                report.geomed_warnings = scores.geomed_nonconverged;
                report.epsilons = scores.scores;
                decision = cfg.defense == DefenseKind::FlCleaner
                               ? trust_propagate(scores.scores, cfg.lambda)
                               : filter_mean_threshold(scores.scores);
            } else {
                decision.benign_ids = selected;  // aggregation-only baselines keep everyone
                decision.lambda = cfg.lambda;
            }

            // Aggregation over the accepted clients, in ascending id order.
            std::vector<int> accepted = decision.benign_ids;
            std::sort(accepted.begin(), accepted.end());
            std::vector<WeightVector> kept;
            std::vector<long long> sizes;
            kept.reserve(accepted.size());
            for (int id : accepted) {
                const auto pos = static_cast<std::size_t>(
                    std::lower_bound(selected.begin(), selected.end(), id) - selected.begin());
                kept.push_back(models[pos]);
                sizes.push_back(static_cast<long long>(partition.client(static_cast<std::size_t>(id)).size()));
            }
            if (cfg.defense == DefenseKind::GeomedAgg) {
                bool converged = true;
                global = aggregate_geomed(kept, 1e-6, 200, &converged);
                if (!converged) ++report.geomed_warnings;
            } else {
                global = aggregate_fedavg(kept, sizes);
            }

            // Metrics against the freshly aggregated model.
            std::set<int> attackers_in_round;
            for (int id : selected)
                if (attacker_ids.count(id)) attackers_in_round.insert(id);
            const BackdoorPattern* pattern =
                is_backdoor(cfg.attack) ? &attack_base.pattern : nullptr;
            const Metrics m = compute_metrics(decision, attackers_in_round, global, spec,
                                              clean_test, asr_view, pattern);

            report.acc = m.acc;
            report.recall = m.recall;
            report.fpr = m.fpr;
            report.asr = m.asr;
            report.benign_ids = decision.benign_ids;
            report.blocked_ids = decision.blocked_ids;
            report.delta = decision.delta;
            report.attackers_selected = static_cast<int>(attackers_in_round.size());
            report.wall_ms = ms_since(t_round);
            result.rounds.push_back(std::move(report));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw Error("round " + std::to_string(round) + ": " + e.what());
        }
    }

    result.final_global = std::move(global);
    result.total_ms = ms_since(t_start);
    return result;
}

} // namespace flcleaner
