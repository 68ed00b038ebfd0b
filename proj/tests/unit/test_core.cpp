#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "burnscan/csv.hpp"
#include "burnscan/date.hpp"
#include "burnscan/errors.hpp"
#include "burnscan/rng.hpp"
#include "burnscan/stats.hpp"

using namespace burnscan;

TEST_CASE("dates parse, print and subtract") {
    const Date d = Date::parse("2019-10-10");
    CHECK(d.to_string() == "2019-10-10");
    CHECK(Date::parse("2019-11-01") - d == 22);
    CHECK((d + 31).to_string() == "2019-11-10");
    CHECK(Date::from_ymd(2020, 2, 29).to_string() == "2020-02-29");
    CHECK_THROWS_AS(Date::parse("2019/10/10"), FormatError);
    CHECK_THROWS_AS(Date::parse("2019-13-01"), FormatError);
    CHECK_THROWS_AS(Date::parse("2019-02-30"), FormatError);
}

TEST_CASE("csv split and escape round trip") {
    const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", ""};
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + csv::escape(fields[i]);
    CHECK(csv::split(line) == fields);
    CHECK_THROWS_AS(csv::split("\"open"), FormatError);
}

TEST_CASE("csv number format round trips") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(gen);
        CHECK(csv::parse_double(csv::format(x)) == x);
    }
    CHECK(csv::format(std::numeric_limits<double>::quiet_NaN()) == "NA");
    CHECK(std::isnan(csv::parse_double("NA")));
    CHECK(std::isnan(csv::parse_double("")));
    CHECK_THROWS_AS(csv::parse_double("1.5x"), FormatError);
}

TEST_CASE("csv table lookup") {
    std::istringstream in("a,b\n1,2\n\n3,4\n");
    const auto t = csv::Table::parse(in);
    CHECK(t.rows().size() == 2);
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("c"), FormatError);
}

TEST_CASE("quantiles match linear interpolation reference values") {
    std::vector<double> ten;
    for (int i = 1; i <= 10; ++i) ten.push_back(i);
    CHECK(quantile_sorted(ten, 50) == doctest::Approx(5.5).epsilon(1e-15));
    CHECK(quantile_sorted(ten, 10) == doctest::Approx(1.9).epsilon(1e-15));
    CHECK(quantile_sorted(ten, 20) == doctest::Approx(2.8).epsilon(1e-15));
    CHECK(quantile_sorted(ten, 80) == doctest::Approx(8.2).epsilon(1e-15));
    CHECK(quantile_sorted(ten, 90) == doctest::Approx(9.1).epsilon(1e-15));

    // Reference values computed with numpy.percentile (linear method).
    const std::vector<double> s{-2.0, 0.25, 3.1, 4.0, 4.0, 7.5, 9.0};
    CHECK(quantile_sorted(s, 0) == -2.0);
    CHECK(quantile_sorted(s, 12.5) == doctest::Approx(-0.3125).epsilon(1e-14));
    CHECK(quantile_sorted(s, 33) == doctest::Approx(3.043).epsilon(1e-14));
    CHECK(quantile_sorted(s, 50) == 4.0);
    CHECK(quantile_sorted(s, 66.6) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(quantile_sorted(s, 90) == doctest::Approx(8.1).epsilon(1e-14));
    CHECK(quantile_sorted(s, 100) == 9.0);
}

namespace {

/// Shewchuk exact summation (msum): the running partials are non-overlapping
/// and their sum equals the exact sum of the inputs.
double exact_sum(const std::vector<double>& xs) {
    std::vector<double> partials;
    for (double x : xs) {
        std::size_t i = 0;
        for (double y : partials) {
            if (std::abs(x) < std::abs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials[i++] = lo;
            x = hi;
        }
        partials.resize(i);
        partials.push_back(x);
    }
    double total = 0.0;
    for (double p : partials) total += p;
    return total;
}

}  // namespace

TEST_CASE("compensated mean agrees with exact summation") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> xs(1000);
    for (auto& x : xs) x = u(gen);
    CHECK(std::abs(compensated_mean(xs) - exact_sum(xs) / 1000.0) <= 1e-12);

    // Ill-conditioned: large cancelling terms around small ones.
    std::vector<double> hard{1e16, 1.0, -1e16, 1.0, 3.0, 1e-3};
    CHECK(compensated_mean(hard) == doctest::Approx(exact_sum(hard) / 6.0).epsilon(1e-15));
    CHECK(std::isnan(compensated_mean(std::vector<double>{})));
}

TEST_CASE("sample sd and spearman reference values") {
    CHECK(sample_sd(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(2.138089935299395));
    // scipy.stats.spearmanr
    CHECK(spearman(std::vector<double>{1, 2, 3, 4, 5, 6}, std::vector<double>{2, 1, 4, 3, 6, 5}) ==
          doctest::Approx(0.8285714285714287));
    CHECK(spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{4, 3, 3, 1}) == doctest::Approx(-1.0));
    CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("rng streams are reproducible and distinct") {
    Rng a(5), b(5), c(derive_seed(5, 1));
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CHECK(Rng(5).next() != c.next());
    Rng r(9);
    for (int i = 0; i < 1000; ++i) {
        const auto k = r.below(7);
        CHECK(k < 7);
        const double x = r.uniform();
        CHECK((x >= 0.0 && x < 1.0));
    }
}
