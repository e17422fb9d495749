#include <cmath>
#include <vector>

#include "doctest.h"

#include "vdt/stats.hpp"
#include "vdt/text.hpp"

using namespace vdt;

TEST_SUITE("stats") {

TEST_CASE("percentile uses linear interpolation between order statistics") {
    const std::vector<double> xs = {10, 3, 7, 1, 9, 2, 8, 5, 4, 6};
    CHECK(stats::percentile(xs, 0.9) == doctest::Approx(9.1).epsilon(1e-12));
    CHECK(stats::percentile(xs, 1.0) == 10.0);
    CHECK(stats::percentile(xs, 0.0) == 1.0);
    CHECK(stats::percentile(xs, 0.5) == doctest::Approx(5.5));
    CHECK_THROWS(stats::percentile(std::vector<double>{}, 0.5));
    CHECK_THROWS(stats::percentile(xs, 1.5));
}

TEST_CASE("pearson against the covariance formula") {
    const std::vector<double> x = {1, 2, 3}, y = {1, 2, 4};
    // Raw-sum form, independent of the centred form the library uses.
    double n = 3, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < 3; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    const double oracle = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    CHECK(std::abs(stats::pearson(x, y) - oracle) < 1e-9);
    CHECK(std::abs(stats::pearson(x, y) - 0.98198) < 1e-5);
    CHECK(stats::pearson(x, x) == doctest::Approx(1.0));
    const std::vector<double> neg = {-1, -2, -3};
    CHECK(stats::pearson(x, neg) == doctest::Approx(-1.0));
    CHECK(std::isnan(stats::pearson(x, std::vector<double>{2, 2, 2})));
}

TEST_CASE("normal confidence interval") {
    const std::vector<double> xs = {1, 2, 3, 4};
    const auto ci = stats::normal_ci95(xs);
    const double sd = std::sqrt(5.0 / 3.0);
    CHECK(ci.mean == 2.5);
    CHECK(ci.lo == doctest::Approx(2.5 - 1.96 * sd / 2.0));
    CHECK(ci.hi == doctest::Approx(2.5 + 1.96 * sd / 2.0));
    const std::vector<double> same = {3, 3, 3};
    const auto flat = stats::normal_ci95(same);
    CHECK(flat.lo == flat.hi);
}

TEST_CASE("number formatting round-trips") {
    CHECK(text::format_fixed(59.999999, 6) == "59.999999");
    CHECK(*text::parse_double(text::format_exact(0.1 + 0.2)) == 0.1 + 0.2);
    CHECK_FALSE(text::parse_double("abc"));
    CHECK_FALSE(text::parse_int("1.5"));
    CHECK(text::quantize6(1.23456789) == 1.234568);
}

}
