#include "flcleaner/geomed.hpp"

#include <cmath>

#include "flcleaner/errors.hpp"

namespace flcleaner {

namespace {

constexpr double kSingularityEps = 1e-12;

void check_pointset(const std::vector<std::span<const double>>& points,
                    const std::vector<double>* weights) {
    if (points.empty()) throw Error("geomed: empty point set");
    const std::size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw Error("geomed: points have unequal dimensions");
    if (weights) {
        if (weights->size() != points.size())
            throw Error("geomed: weight count != point count");
        double total = 0.0;
        for (double w : *weights) {
            if (w < 0.0) throw Error("geomed: negative weight");
            total += w;
        }
        if (total <= 0.0) throw Error("geomed: weights are all zero");
    }
}

double weight_of(const std::vector<double>* weights, std::size_t i) {
    return weights ? (*weights)[i] : 1.0;
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return std::sqrt(s);
}

} // namespace

double geomed_objective(const std::vector<std::span<const double>>& points,
                        const std::vector<double>* weights, std::span<const double> m) {
    double obj = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        obj += weight_of(weights, i) * distance(points[i], m);
    return obj;
}

std::vector<double> weiszfeld_step(const std::vector<std::span<const double>>& points,
                                   const std::vector<double>* weights,
                                   std::span<const double> current) {
    const std::size_t dim = current.size();
    std::vector<double> next(dim, 0.0);
    double denom = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = std::max(distance(points[i], current), kSingularityEps);
        const double coef = weight_of(weights, i) / d;
        denom += coef;
        for (std::size_t k = 0; k < dim; ++k) next[k] += coef * points[i][k];
    }
    for (double& v : next) v /= denom;
    return next;
}

GeomedResult geometric_median(const std::vector<std::span<const double>>& points,
                              const std::vector<double>* weights, double tol, int max_iters) {
    check_pointset(points, weights);
    const std::size_t dim = points[0].size();
    GeomedResult res;
    if (points.size() == 1) {
        res.point.assign(points[0].begin(), points[0].end());
        res.converged = true;
        return res;
    }
    // Start at the weighted coordinate-wise mean.
    std::vector<double> m(dim, 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double w = weight_of(weights, i);
        wsum += w;
        for (std::size_t k = 0; k < dim; ++k) m[k] += w * points[i][k];
    }
    for (double& v : m) v /= wsum;

    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> next = weiszfeld_step(points, weights, m);
        double step2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double d = next[k] - m[k];
            step2 += d * d;
        }
        m = std::move(next);
        res.iterations = it + 1;
        if (std::sqrt(step2) < tol) {
            res.converged = true;
            break;
        }
    }
    res.point = std::move(m);
    return res;
}

GeomedResult geometric_median(const std::vector<std::vector<double>>& points,
                              const std::vector<double>* weights, double tol, int max_iters) {
    std::vector<std::span<const double>> views;
    views.reserve(points.size());
    for (const auto& p : points) views.emplace_back(p.data(), p.size());
    return geometric_median(views, weights, tol, max_iters);
}

} // namespace flcleaner
