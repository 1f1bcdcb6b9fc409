#include "flcleaner/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flcleaner/errors.hpp"
#include "flcleaner/rng.hpp"

namespace flcleaner {

AttackKind attack_kind_from_string(const std::string& name) {
    if (name == "none") return AttackKind::None;
    if (name == "sign_flip") return AttackKind::SignFlip;
    if (name == "additive_noise") return AttackKind::AdditiveNoise;
    if (name == "same_value") return AttackKind::SameValue;
    if (name == "scaling") return AttackKind::Scaling;
    if (name == "dba") return AttackKind::Dba;
    if (name == "neurotoxin") return AttackKind::Neurotoxin;
    throw ConfigError("unknown attack: " + name);
}

std::string attack_kind_to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::None: return "none";
        case AttackKind::SignFlip: return "sign_flip";
        case AttackKind::AdditiveNoise: return "additive_noise";
        case AttackKind::SameValue: return "same_value";
        case AttackKind::Scaling: return "scaling";
        case AttackKind::Dba: return "dba";
        case AttackKind::Neurotoxin: return "neurotoxin";
    }
    return "?";
}

bool is_byzantine(AttackKind kind) {
    return kind == AttackKind::SignFlip || kind == AttackKind::AdditiveNoise ||
           kind == AttackKind::SameValue || kind == AttackKind::Scaling;
}

bool is_backdoor(AttackKind kind) {
    return kind == AttackKind::Dba || kind == AttackKind::Neurotoxin;
}

void AttackSpec::validate() const {
    switch (kind) {
        case AttackKind::SignFlip:
            if (xi <= 0.0) throw ConfigError("sign_flip: xi must be > 0");
            break;
        case AttackKind::AdditiveNoise:
            if (sigma <= 0.0) throw ConfigError("additive_noise: sigma must be > 0");
            if (noise_fraction <= 0.0 || noise_fraction > 1.0)
                throw ConfigError("additive_noise: fraction must be in (0,1]");
            break;
        case AttackKind::Scaling:
            if (a <= 1.0) throw ConfigError("scaling: a must be > 1");
            break;
        case AttackKind::Dba:
        case AttackKind::Neurotoxin:
            if (poison_rate <= 0.0 || poison_rate > 1.0)
                throw ConfigError("backdoor: poison_rate must be in (0,1]");
            if (kind == AttackKind::Neurotoxin && (k_percent <= 0.0 || k_percent >= 100.0))
                throw ConfigError("neurotoxin: k_percent must be in (0,100)");
            break;
        case AttackKind::SameValue:
        case AttackKind::None:
            break;
    }
}

WeightVector apply_byzantine(const WeightVector& weights, const AttackSpec& attack) {
    if (!is_byzantine(attack.kind)) throw Error("apply_byzantine: not a byzantine attack kind");
    attack.validate();
    WeightVector out = weights;
    switch (attack.kind) {
        case AttackKind::SignFlip:
            for (auto& v : out.values) v = -attack.xi * v;
            break;
        case AttackKind::Scaling:
            for (auto& v : out.values) v = attack.a * v;
            break;
        case AttackKind::SameValue:
            std::fill(out.values.begin(), out.values.end(), attack.c);
            break;
        case AttackKind::AdditiveNoise: {
            Prng rng(derive_seed(attack.seed, 0x6e6f6973ULL));
            const auto dim = static_cast<int>(out.size());
            if (attack.noise_fraction >= 1.0) {
                for (auto& v : out.values) v += attack.sigma * rng.gaussian();
            } else {
                const int count =
                    std::max<int>(1, static_cast<int>(std::llround(attack.noise_fraction * dim)));
                const auto coords = rng.sample_without_replacement(dim, count);
                for (int idx : coords)
                    out.values[static_cast<std::size_t>(idx)] += attack.sigma * rng.gaussian();
            }
            break;
        }
        default:
            break;
    }
    return out;
}

std::vector<std::uint8_t> neurotoxin_mask(const std::vector<double>& gradient, double k_percent) {
    const std::size_t dim = gradient.size();
    const auto trainable =
        static_cast<std::size_t>(std::llround(k_percent / 100.0 * static_cast<double>(dim)));
    std::vector<std::size_t> order(dim);
    std::iota(order.begin(), order.end(), 0);
    // Smallest |g| first; equal magnitudes keep index order.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const double ax = std::fabs(gradient[x]), ay = std::fabs(gradient[y]);
        if (ax != ay) return ax < ay;
        return x < y;
    });
    std::vector<std::uint8_t> mask(dim, 0);
    for (std::size_t i = 0; i < trainable && i < dim; ++i) mask[order[i]] = 1;
    return mask;
}

WeightVector run_backdoor_client(const WeightVector& global_weights, const ModelSpec& spec,
                                 const DataView& local, const AttackSpec& attack,
                                 const TrainParams& params) {
    if (!is_backdoor(attack.kind)) throw Error("run_backdoor_client: not a backdoor attack kind");
    attack.validate();

    // Materialize the local rows and poison a seeded subset.
    Dataset poisoned = materialize(local);
    const auto n = static_cast<int>(poisoned.size());
    const int count = static_cast<int>(std::llround(attack.poison_rate * n));
    Prng rng(derive_seed(attack.seed, 0x706f6973ULL));
    const auto chosen = rng.sample_without_replacement(n, std::min(count, n));

    BackdoorPattern pattern = attack.pattern;
    if (attack.kind == AttackKind::Neurotoxin) pattern.part_index.reset();  // full pattern
    for (int idx : chosen) apply_trigger(poisoned, static_cast<std::size_t>(idx), pattern);

    DataView view = full_view(poisoned);
    if (attack.kind == AttackKind::Dba)
        return train_local(global_weights, spec, view, params.epochs, params.lr, params.batch_size);

    // Neurotoxin: freeze the top (100-k)% coordinates of the initial
    // full-batch gradient for every step of this round.
    const auto [loss, grad] = loss_and_gradient(global_weights, spec, view);
    (void)loss;
    const auto mask = neurotoxin_mask(grad, attack.k_percent);
    return train_local(global_weights, spec, view, params.epochs, params.lr, params.batch_size,
                       &mask);
}

} // namespace flcleaner
