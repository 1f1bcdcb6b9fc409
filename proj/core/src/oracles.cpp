#include "flcleaner/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flcleaner/errors.hpp"

namespace flcleaner {

std::pair<std::vector<double>, double> geomed_grid_search(
    const std::vector<std::vector<double>>& points, double step) {
    if (points.empty()) throw Error("grid oracle: empty point set");
    if (points[0].size() != 2) throw Error("grid oracle: 2-D points only");
    double xmin = points[0][0], xmax = points[0][0];
    double ymin = points[0][1], ymax = points[0][1];
    for (const auto& p : points) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    const int nx = static_cast<int>(std::floor((xmax - xmin) / step)) + 1;
    const int ny = static_cast<int>(std::floor((ymax - ymin) / step)) + 1;
    double best_obj = std::numeric_limits<double>::infinity();
    double best_x = xmin, best_y = ymin;
    for (int iy = 0; iy < ny; ++iy) {
        const double y = ymin + iy * step;
        for (int ix = 0; ix < nx; ++ix) {
            const double x = xmin + ix * step;
            double obj = 0.0;
            for (const auto& p : points) obj += std::hypot(p[0] - x, p[1] - y);
            if (obj < best_obj) {
                best_obj = obj;
                best_x = x;
                best_y = y;
            }
        }
    }
    return {{best_x, best_y}, best_obj};
}

std::vector<int> trust_first_gap_search(const std::vector<double>& epsilons, double lambda) {
    if (epsilons.empty()) throw Error("trust oracle: empty error list");
    std::vector<int> order(epsilons.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (epsilons[static_cast<std::size_t>(a)] != epsilons[static_cast<std::size_t>(b)])
            return epsilons[static_cast<std::size_t>(a)] < epsilons[static_cast<std::size_t>(b)];
        return a < b;
    });
    const auto [mn, mx] = std::minmax_element(epsilons.begin(), epsilons.end());
    const double delta = lambda * (*mx - *mn);
    // Find the first adjacent gap of the sorted sequence that exceeds delta.
    std::size_t cut = order.size();
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const double gap = epsilons[static_cast<std::size_t>(order[i + 1])] -
                           epsilons[static_cast<std::size_t>(order[i])];
        if (gap > delta) {
            cut = i + 1;
            break;
        }
    }
    return std::vector<int>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
}

} // namespace flcleaner
