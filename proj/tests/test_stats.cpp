#include <vector>

#include <doctest.h>

#include "plrank/stats.hpp"

using namespace plrank;

TEST_CASE("pearson and spearman on exact relationships") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<double> y{2.0, 4.0, 6.0, 8.0, 10.0};
  CHECK(*pearson_correlation(x, y) == doctest::Approx(1.0));
  CHECK(*spearman_correlation(x, y) == doctest::Approx(1.0));

  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(*pearson_correlation(x, neg) == doctest::Approx(-1.0));
  CHECK(*spearman_correlation(x, neg) == doctest::Approx(-1.0));

  // monotone but nonlinear: spearman stays at 1, pearson drops below
  const std::vector<double> cubed{1.0, 8.0, 27.0, 64.0, 125.0};
  CHECK(*spearman_correlation(x, cubed) == doctest::Approx(1.0));
  CHECK(*pearson_correlation(x, cubed) < 1.0);
}

TEST_CASE("correlation is undefined for constant columns") {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const std::vector<double> flat{4.0, 4.0, 4.0};
  CHECK_FALSE(pearson_correlation(x, flat).has_value());
  CHECK_FALSE(spearman_correlation(flat, x).has_value());
}

TEST_CASE("average ranks share ties") {
  const std::vector<double> v{10.0, 20.0, 20.0, 30.0};
  const auto ranks = average_ranks(v);
  CHECK(ranks[0] == doctest::Approx(1.0));
  CHECK(ranks[1] == doctest::Approx(2.5));
  CHECK(ranks[2] == doctest::Approx(2.5));
  CHECK(ranks[3] == doctest::Approx(4.0));
}

TEST_CASE("spearman with ties uses average ranks") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y{1.0, 2.0, 2.0, 3.0};
  // hand value: ranks y = (1, 2.5, 2.5, 4); pearson of (1,2,3,4) with it
  const double rho = *spearman_correlation(x, y);
  CHECK(rho == doctest::Approx(0.9486832980505138).epsilon(1e-12));
}
