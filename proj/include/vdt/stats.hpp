#pragma once

#include <span>
#include <vector>

namespace vdt::stats {

double mean(std::span<const double> xs);

// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);

struct Interval {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// Normal-approximation 95% confidence interval: mean ± 1.96·sd/√n.
Interval normal_ci95(std::span<const double> xs);

// Linear interpolation between order statistics at position q·(n−1).
double percentile(std::span<const double> xs, double q);

// Pearson correlation; NaN when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace vdt::stats
