#include "vdt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vdt::stats {

double mean(std::span<const double> xs) {
    if (xs.empty()) {
        throw std::invalid_argument("mean of empty range");
    }
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

Interval normal_ci95(std::span<const double> xs) {
    Interval iv;
    iv.mean = mean(xs);
    const double half = 1.96 * stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
    iv.lo = iv.mean - half;
    iv.hi = iv.mean + half;
    return iv;
}

double percentile(std::span<const double> xs, double q) {
    if (xs.empty()) {
        throw std::invalid_argument("percentile of empty range");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("percentile q must lie in [0, 1]");
    }
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("pearson needs two equal-length series of at least 2 values");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace vdt::stats
