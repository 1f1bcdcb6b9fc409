#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "flcleaner/attacks.hpp"
#include "flcleaner/defense.hpp"
#include "flcleaner/errors.hpp"
#include "flcleaner/oracles.hpp"
#include "helpers.hpp"

using namespace flcleaner;

namespace {

std::vector<ClientScore> make_scores(const std::vector<double>& eps) {
    std::vector<ClientScore> s;
    for (std::size_t i = 0; i < eps.size(); ++i)
        s.push_back({static_cast<int>(i), eps[i]});
    return s;
}

} // namespace

TEST_CASE("trust propagation hand trace") {
    // delta = 0.3 * (0.52 - 0.01) = 0.153; the 0.013 -> 0.50 gap breaks the walk.
    const auto scores = make_scores({0.01, 0.012, 0.013, 0.50, 0.52});
    const FilterDecision dec = trust_propagate(scores, 0.3);
    CHECK(dec.delta == doctest::Approx(0.153));
    CHECK(dec.benign_ids == std::vector<int>{0, 1, 2});
    CHECK(dec.blocked_ids == std::vector<int>{3, 4});
}

TEST_CASE("trust propagation degenerate cases") {
    const FilterDecision all_equal = trust_propagate(make_scores({0.2, 0.2, 0.2, 0.2}), 0.3);
    CHECK(all_equal.delta == 0.0);
    CHECK(all_equal.benign_ids.size() == 4);
    CHECK(all_equal.blocked_ids.empty());

    const FilterDecision single = trust_propagate(make_scores({0.9}), 0.3);
    CHECK(single.benign_ids == std::vector<int>{0});

    const FilterDecision lambda_one = trust_propagate(make_scores({0.0, 0.3, 0.9, 5.0}), 1.0);
    CHECK(lambda_one.benign_ids.size() == 4);
}

TEST_CASE("trust propagation rejects non-finite scores") {
    auto scores = make_scores({0.1, 0.2});
    scores[1].epsilon = std::nan("");
    CHECK_THROWS_AS(trust_propagate(scores, 0.3), Error);
}

TEST_CASE("trust propagation is order-invariant and matches the oracle") {
    Prng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(12));
        std::vector<double> eps(static_cast<std::size_t>(n));
        for (auto& e : eps) e = rng.uniform01();
        const double lambda = rng.uniform01();

        const FilterDecision dec = trust_propagate(make_scores(eps), lambda);
        CHECK_FALSE(dec.benign_ids.empty());
        CHECK(dec.benign_ids.size() + dec.blocked_ids.size() == static_cast<std::size_t>(n));

        // Oracle equivalence: same accepted set.
        const auto oracle = trust_first_gap_search(eps, lambda);
        std::set<int> got(dec.benign_ids.begin(), dec.benign_ids.end());
        std::set<int> want(oracle.begin(), oracle.end());
        CHECK(got == want);

        // Permutation invariance.
        std::vector<int> perm(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        rng.shuffle(perm);
        std::vector<ClientScore> shuffled;
        for (int i : perm) shuffled.push_back({i, eps[static_cast<std::size_t>(i)]});
        const FilterDecision dec2 = trust_propagate(shuffled, lambda);
        std::set<int> got2(dec2.benign_ids.begin(), dec2.benign_ids.end());
        CHECK(got2 == got);

        // Lambda monotonicity: larger lambda accepts a superset.
        const double lambda2 = lambda + (1.0 - lambda) * rng.uniform01();
        const FilterDecision bigger = trust_propagate(make_scores(eps), lambda2);
        std::set<int> superset(bigger.benign_ids.begin(), bigger.benign_ids.end());
        for (int id : got) CHECK(superset.count(id) == 1);
    }
}

TEST_CASE("mean threshold filter") {
    const FilterDecision a = filter_mean_threshold(make_scores({1.0, 1.0, 4.0}));
    CHECK(a.benign_ids == std::vector<int>{0, 1});
    CHECK(a.blocked_ids == std::vector<int>{2});
    CHECK(a.delta == doctest::Approx(2.0));

    const FilterDecision equal = filter_mean_threshold(make_scores({3.0, 3.0, 3.0}));
    CHECK(equal.benign_ids.size() == 3);
    CHECK(equal.blocked_ids.empty());

    const FilterDecision pair = filter_mean_threshold(make_scores({0.0, 10.0}));
    CHECK(pair.benign_ids == std::vector<int>{0});
    CHECK(pair.blocked_ids == std::vector<int>{1});
}

TEST_CASE("fedavg aggregation") {
    WeightVector a, b;
    a.values = {1.0, 2.0};
    b.values = {3.0, 4.0};
    const WeightVector equal = aggregate_fedavg({a, b}, {5, 5});
    CHECK(equal.values == std::vector<double>{2.0, 3.0});

    WeightVector c, d;
    c.values = {0.0};
    d.values = {4.0};
    const WeightVector weighted = aggregate_fedavg({c, d}, {3, 1});
    CHECK(weighted.values[0] == doctest::Approx(1.0));

    const WeightVector single = aggregate_fedavg({a}, {7});
    CHECK(single == a);

    WeightVector bad;
    bad.values = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(aggregate_fedavg({a, bad}, {1, 1}), ShapeError);
    CHECK_THROWS_AS(aggregate_fedavg({a, b}, {1, 0}), Error);
}

TEST_CASE("geomed aggregation") {
    WeightVector a;
    a.values = {1.0, -1.0};
    const WeightVector same = aggregate_geomed({a, a, a});
    CHECK(std::fabs(same.values[0] - 1.0) < 1e-9);

    WeightVector x, y, z;
    x.values = {0.0};
    y.values = {0.0};
    z.values = {10.0};
    const WeightVector med = aggregate_geomed({x, y, z});
    CHECK(std::fabs(med.values[0]) < 1e-4);
}

TEST_CASE("identical clients score identically and normalize to 0.5") {
    const ModelSpec spec = mlp_spec(16, 8, 4, 90);
    const WeightVector w = init_model(spec);
    Dataset test = testutil::random_dataset(30, 16, 4, 91);
    const TriggerSet trig = make_trigger_set(test, 10, 92);
    const LayerMask mask = full_layer_mask(spec);

    // Normalization of identical maps: every NAM entry is sigmoid(0) = 0.5.
    const std::vector<double> am{1.0, -2.0, 3.0};
    std::vector<std::span<const double>> maps{{am.data(), am.size()},
                                              {am.data(), am.size()},
                                              {am.data(), am.size()}};
    const auto nams = normalize_against_geomed(maps);
    for (const auto& nam : nams)
        for (double v : nam) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));

    const CvaeTrainingSet ts = build_training_set(w, spec, trig, 1, 2, 0.05, 8, mask, 93);
    const CvaeState cvae = train_cvae(ts, 6, {0.0, 0.5, 10}, 0.05, 8, 4, 94);
    const ScoreSet scores = score_clients({w, w, w}, {5, 9, 11}, spec, trig, mask, cvae);
    REQUIRE(scores.scores.size() == 3);
    CHECK(scores.scores[0].client_id == 5);
    CHECK(scores.scores[0].epsilon == doctest::Approx(scores.scores[1].epsilon));
    CHECK(scores.scores[1].epsilon == doctest::Approx(scores.scores[2].epsilon));
}

TEST_CASE("score_clients preconditions") {
    const ModelSpec spec = mlp_spec(8, 4, 2, 1);
    const WeightVector w = init_model(spec);
    Dataset test = testutil::random_dataset(10, 8, 2, 2);
    const TriggerSet trig = make_trigger_set(test, 4, 3);
    const LayerMask mask = full_layer_mask(spec);
    const CvaeState cvae = init_cvae(activation_dim(spec, mask), 2, 2, 4);
    CHECK_THROWS_AS(score_clients({w}, {0}, spec, trig, mask, cvae), Error);
}

TEST_CASE("sign-flip attackers separate from benign clients end to end") {
    // Small synthetic round: benign clients train from the same global model
    // on different slices; attackers negate their update. With a trained
    // CVAE every attacker scores strictly above every benign client.
    const int classes = 4;
    const ModelSpec spec = mlp_spec(25, 10, classes, 95);
    const WeightVector global = init_model(spec);
    Dataset train = testutil::random_image_dataset(240, 5, 5, classes, 96);
    // Make classes learnable: shift pixels by the label so maps carry signal.
    for (std::size_t i = 0; i < train.size(); ++i) {
        double* px = train.sample_mut(i);
        for (int j = 0; j < 25; ++j)
            px[j] = std::clamp(0.2 * train.labels[i] + 0.2 * px[j], 0.0, 1.0);
    }
    Dataset test = train;
    const TriggerSet trig = make_trigger_set(test, 30, 97);
    const LayerMask mask = full_layer_mask(spec);

    const CvaeTrainingSet ts = build_training_set(global, spec, trig, 3, 5, 0.05, 8, mask, 98);
    const CvaeState cvae = train_cvae(ts, 20, {0.0, 0.5, 10}, 0.01, 16, 8, 99);

    const int n_clients = 6;
    std::vector<WeightVector> models;
    std::vector<int> ids;
    for (int u = 0; u < n_clients; ++u) {
        std::vector<int> slice;
        for (int i = u * 40; i < (u + 1) * 40; ++i) slice.push_back(i);
        const DataView view{&train, slice};
        WeightVector m = train_local(global, spec, view, 2, 0.05, 8);
        if (u >= 4) {  // two sign-flip attackers
            AttackSpec a;
            a.kind = AttackKind::SignFlip;
            a.xi = 1.0;
            m = apply_byzantine(m, a);
        }
        models.push_back(std::move(m));
        ids.push_back(u);
    }
    const ScoreSet scores = score_clients(models, ids, spec, trig, mask, cvae);
    double max_benign = 0.0, min_attacker = 1e18;
    for (const auto& s : scores.scores) {
        if (s.client_id >= 4)
            min_attacker = std::min(min_attacker, s.epsilon);
        else
            max_benign = std::max(max_benign, s.epsilon);
    }
    CHECK(min_attacker > max_benign);

    const FilterDecision dec = trust_propagate(scores.scores, 0.3);
    CHECK(dec.blocked_ids.size() == 2);
    CHECK(std::set<int>(dec.blocked_ids.begin(), dec.blocked_ids.end()) == std::set<int>{4, 5});
}
