#include "flcleaner/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flcleaner/errors.hpp"
#include "flcleaner/geomed.hpp"
#include "flcleaner/parallel.hpp"

namespace flcleaner {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

std::vector<std::vector<double>> normalize_against_geomed(
    const std::vector<std::span<const double>>& client_maps, int* nonconverged) {
    const GeomedResult gm = geometric_median(client_maps);
    if (nonconverged && !gm.converged) ++*nonconverged;
    std::vector<std::vector<double>> nams(client_maps.size());
    for (std::size_t u = 0; u < client_maps.size(); ++u) {
        auto& nam = nams[u];
        nam.resize(client_maps[u].size());
        for (std::size_t d = 0; d < nam.size(); ++d)
            nam[d] = stable_sigmoid(client_maps[u][d] - gm.point[d]);
    }
    return nams;
}

ScoreSet score_clients(const std::vector<WeightVector>& client_models,
                       const std::vector<int>& client_ids, const ModelSpec& spec,
                       const TriggerSet& trigger, const LayerMask& mask, const CvaeState& cvae) {
    const std::size_t n_clients = client_models.size();
    if (n_clients < 2) throw Error("score_clients: need at least two clients");
    if (client_ids.size() != n_clients) throw Error("score_clients: id/model count mismatch");
    const std::size_t len = client_models[0].size();
    for (const auto& m : client_models)
        if (m.size() != len) throw ShapeError("score_clients: weight vectors differ in length");
    const int am_dim = activation_dim(spec, mask);
    if (am_dim != cvae.input_dim)
        throw ShapeError("score_clients: activation dim " + std::to_string(am_dim) +
                         " != cvae input dim " + std::to_string(cvae.input_dim));

    // Capture every client's activation maps for the whole trigger set.
    std::vector<int> natural(trigger.size());
    for (std::size_t i = 0; i < natural.size(); ++i) natural[i] = static_cast<int>(i);
    std::vector<std::vector<ActivationMap>> maps(n_clients);
    parallel_for(n_clients, [&](std::size_t u) {
        maps[u] = forward(client_models[u], spec, trigger.data, natural, &mask).maps;
    });

    const std::size_t n_samples = trigger.size();
    std::vector<double> errors(n_clients * n_samples, 0.0);
    std::vector<int> nonconv(n_samples, 0);
    parallel_for(n_samples, [&](std::size_t s) {
        std::vector<std::span<const double>> pts;
        pts.reserve(n_clients);
        for (std::size_t u = 0; u < n_clients; ++u)
            pts.emplace_back(maps[u][s].values.data(), maps[u][s].values.size());
        const auto nams = normalize_against_geomed(pts, &nonconv[s]);
        const int label = trigger.data.labels[s];
        for (std::size_t u = 0; u < n_clients; ++u)
            errors[u * n_samples + s] = reconstruction_error(cvae, nams[u], label);
    });

    ScoreSet out;
    out.geomed_nonconverged = std::accumulate(nonconv.begin(), nonconv.end(), 0);
    out.scores.resize(n_clients);
    for (std::size_t u = 0; u < n_clients; ++u) {
        double sum = 0.0;
        for (std::size_t s = 0; s < n_samples; ++s) sum += errors[u * n_samples + s];
        out.scores[u] = {client_ids[u], sum / static_cast<double>(n_samples)};
    }
    return out;
}

FilterDecision trust_propagate(const std::vector<ClientScore>& scores, double lambda) {
    if (scores.empty()) throw Error("trust_propagate: no scores");
    for (const auto& s : scores)
        if (!std::isfinite(s.epsilon) || s.epsilon < 0.0)
            throw Error("trust_propagate: non-finite or negative score for client " +
                        std::to_string(s.client_id));

    std::vector<ClientScore> sorted = scores;
    std::stable_sort(sorted.begin(), sorted.end(), [](const ClientScore& a, const ClientScore& b) {
        if (a.epsilon != b.epsilon) return a.epsilon < b.epsilon;
        return a.client_id < b.client_id;
    });

    FilterDecision dec;
    dec.lambda = lambda;
    dec.delta = lambda * (sorted.back().epsilon - sorted.front().epsilon);
    dec.benign_ids.push_back(sorted.front().client_id);
    std::size_t i = 0;
    while (i + 1 < sorted.size() && sorted[i + 1].epsilon <= sorted[i].epsilon + dec.delta) {
        dec.benign_ids.push_back(sorted[i + 1].client_id);
        ++i;
    }
    for (std::size_t j = i + 1; j < sorted.size(); ++j) dec.blocked_ids.push_back(sorted[j].client_id);
    return dec;
}

FilterDecision filter_mean_threshold(const std::vector<ClientScore>& scores) {
    if (scores.empty()) throw Error("filter_mean_threshold: no scores");
    double mean = 0.0;
    for (const auto& s : scores) mean += s.epsilon;
    mean /= static_cast<double>(scores.size());

    std::vector<ClientScore> sorted = scores;
    std::stable_sort(sorted.begin(), sorted.end(), [](const ClientScore& a, const ClientScore& b) {
        if (a.epsilon != b.epsilon) return a.epsilon < b.epsilon;
        return a.client_id < b.client_id;
    });

    FilterDecision dec;
    dec.delta = mean;
    for (const auto& s : sorted) {
        if (s.epsilon < mean)
            dec.benign_ids.push_back(s.client_id);
        else
            dec.blocked_ids.push_back(s.client_id);
    }
    if (dec.benign_ids.empty()) {  // all scores equal: keep everyone
        dec.benign_ids = std::move(dec.blocked_ids);
        dec.blocked_ids.clear();
    }
    return dec;
}

WeightVector aggregate_fedavg(const std::vector<WeightVector>& models,
                              const std::vector<long long>& dataset_sizes) {
    if (models.empty()) throw Error("aggregate_fedavg: no models");
    if (models.size() != dataset_sizes.size())
        throw Error("aggregate_fedavg: model/size count mismatch");
    const std::size_t len = models[0].size();
    double total = 0.0;
    for (std::size_t u = 0; u < models.size(); ++u) {
        if (models[u].size() != len)
            throw ShapeError("aggregate_fedavg: weight vectors differ in length");
        if (dataset_sizes[u] <= 0) throw Error("aggregate_fedavg: dataset sizes must be positive");
        total += static_cast<double>(dataset_sizes[u]);
    }
    WeightVector out;
    out.values.assign(len, 0.0);
    // Fixed client order keeps the reduction deterministic.
    for (std::size_t u = 0; u < models.size(); ++u) {
        const double w = static_cast<double>(dataset_sizes[u]) / total;
        const double* src = models[u].data();
        for (std::size_t i = 0; i < len; ++i) out.values[i] += w * src[i];
    }
    return out;
}

WeightVector aggregate_geomed(const std::vector<WeightVector>& models, double tol, int max_iters,
                              bool* converged) {
    if (models.empty()) throw Error("aggregate_geomed: no models");
    std::vector<std::span<const double>> pts;
    pts.reserve(models.size());
    for (const auto& m : models) pts.emplace_back(m.data(), m.size());
    GeomedResult res = geometric_median(pts, nullptr, tol, max_iters);
    if (converged) *converged = res.converged;
    WeightVector out;
    out.values = std::move(res.point);
    return out;
}

} // namespace flcleaner
