#include <doctest.h>

#include <cmath>

#include "dbrn/autodiff.hpp"
#include "dbrn/errors.hpp"
#include "fd_check.hpp"

using namespace dbrn;
namespace ag = dbrn::ag;

TEST_SUITE("autodiff") {

TEST_CASE("smooth_l1 scalar branch values") {
  const auto pred = ag::constant({1}, {0.5});
  const auto zero = ag::constant({1}, {0.0});
  CHECK(ag::smooth_l1(pred, zero, 1.0)->value[0] == doctest::Approx(0.125));
  const auto pred2 = ag::constant({1}, {2.0});
  CHECK(ag::smooth_l1(pred2, zero, 1.0)->value[0] == doctest::Approx(1.5));
}

TEST_CASE("smooth_l1 is continuous and C1 at the kink") {
  const auto zero = ag::constant({1}, {0.0});
  const double beta = 1.0;
  const double at = ag::smooth_l1(ag::constant({1}, {beta}), zero, beta)->value[0];
  CHECK(at == doctest::Approx(beta * beta / 2.0));
  const double d = 1e-7;
  const double below =
      ag::smooth_l1(ag::constant({1}, {beta - d}), zero, beta)->value[0];
  const double above =
      ag::smooth_l1(ag::constant({1}, {beta + d}), zero, beta)->value[0];
  CHECK((at - below) / d == doctest::Approx(beta).epsilon(1e-5));
  CHECK((above - at) / d == doctest::Approx(beta).epsilon(1e-5));
}

TEST_CASE("softmax of zeros and its hand jacobian") {
  const auto x = ag::param({3}, {0.0, 0.0, 0.0});
  const auto s = ag::softmax(x, 0);
  for (double v : s->value) CHECK(v == doctest::Approx(1.0 / 3.0));
  // d s[0] / d x = [2/9, -1/9, -1/9]
  const auto first = ag::slice(s, 0, 0, 1);
  ag::backward(first);
  CHECK(x->grad[0] == doctest::Approx(2.0 / 9.0));
  CHECK(x->grad[1] == doctest::Approx(-1.0 / 9.0));
  CHECK(x->grad[2] == doctest::Approx(-1.0 / 9.0));
}

TEST_CASE("layer_norm standardizes pre-affine") {
  CounterRng rng(5);
  std::vector<double> vals(16);
  for (auto& v : vals) v = 2.0 + 3.0 * rng.next_gaussian();
  const auto x = ag::constant({2, 8}, vals);
  const auto gain = ag::constant({8}, std::vector<double>(8, 1.0));
  const auto bias = ag::constant({8}, std::vector<double>(8, 0.0));
  const auto y = ag::layer_norm(x, gain, bias);
  for (std::size_t lane = 0; lane < 2; ++lane) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 8; ++i) mean += y->value[lane * 8 + i];
    mean /= 8.0;
    for (std::size_t i = 0; i < 8; ++i) {
      const double d = y->value[lane * 8 + i] - mean;
      var += d * d;
    }
    var /= 8.0;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("group_norm standardizes per group") {
  CounterRng rng(6);
  std::vector<double> vals(2 * 4 * 5);
  for (auto& v : vals) v = 1.0 + rng.next_gaussian();
  const auto x = ag::constant({2, 4, 5}, vals);
  const auto gain = ag::constant({4}, std::vector<double>(4, 1.0));
  const auto bias = ag::constant({4}, std::vector<double>(4, 0.0));
  const auto y = ag::group_norm(x, 2, gain, bias);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t g = 0; g < 2; ++g) {
      double mean = 0.0, var = 0.0;
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 5; ++i)
          mean += y->value[(n * 4 + g * 2 + c) * 5 + i];
      mean /= 10.0;
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 5; ++i) {
          const double d = y->value[(n * 4 + g * 2 + c) * 5 + i] - mean;
          var += d * d;
        }
      var /= 10.0;
      CHECK(std::abs(mean) < 1e-8);
      CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
  CHECK_THROWS_AS(ag::group_norm(x, 3, gain, bias), param_error);
}

TEST_CASE("backward on a quadratic") {
  const auto x = ag::param({3}, {1.0, 2.0, 3.0});
  const auto loss = ag::sum_all(ag::mul(x, x));
  ag::backward(loss);
  CHECK(x->grad == std::vector<double>{2.0, 4.0, 6.0});
}

TEST_CASE("disconnected parameter keeps a zero grad") {
  const auto x = ag::param({2}, {1.0, 2.0});
  const auto unused = ag::param({2}, {5.0, 5.0});
  const auto loss = ag::sum_all(x);
  ag::backward(loss);
  unused->ensure_grad();
  CHECK(unused->grad == std::vector<double>{0.0, 0.0});
}

TEST_CASE("repeated backward accumulates until zeroed") {
  const auto x = ag::param({1}, {4.0});
  const auto loss = ag::sum_all(ag::mul(x, x));
  ag::backward(loss);
  CHECK(x->grad[0] == doctest::Approx(8.0));
  ag::backward(loss);
  CHECK(x->grad[0] == doctest::Approx(16.0));
  ag::zero_grad(x);
  CHECK(x->grad[0] == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  const auto x = ag::param({2}, {1.0, 2.0});
  CHECK_THROWS_AS(ag::backward(ag::mul(x, x)), param_error);
}

TEST_CASE("shape errors name the op") {
  const auto a = ag::constant({2, 3}, std::vector<double>(6, 0.0));
  const auto b = ag::constant({2, 3}, std::vector<double>(6, 0.0));
  CHECK_THROWS_WITH_AS(ag::matmul(a, b), doctest::Contains("matmul"), param_error);
  CHECK_THROWS_WITH_AS(ag::add(a, ag::constant({4}, std::vector<double>(4, 0.0))),
                       doctest::Contains("add"), param_error);
}

TEST_CASE("gelu matches the exact gaussian cdf form") {
  const auto x = ag::constant({3}, {-1.0, 0.0, 2.0});
  const auto y = ag::gelu(x);
  for (std::size_t i = 0; i < 3; ++i) {
    const double v = x->value[i];
    const double expect = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
    CHECK(y->value[i] == doctest::Approx(expect).epsilon(1e-15));
  }
  CHECK(y->value[1] == 0.0);
}

TEST_CASE("finite differences across the op table") {
  dbrn_test::FdFailure failure;
  for (const auto& c : dbrn_test::autodiff_fd_cases()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      CAPTURE(c.name);
      CAPTURE(seed);
      const bool ok = dbrn_test::fd_check_case(c, seed, 1e-5, 1e-4, 1e-6, failure);
      if (!ok) {
        MESSAGE("failed at ", failure.where, " analytic=", failure.analytic,
                " numeric=", failure.numeric);
      }
      CHECK(ok);
    }
  }
}

}  // TEST_SUITE
