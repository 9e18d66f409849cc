#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "cssl/logprob.hpp"
#include "cssl/rng.hpp"

using namespace cssl;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Linear-space oracles, deliberately naive: they cross-check the log-space
// kernels on inputs where direct evaluation is safe.
double oracle_consensus(const std::vector<double>& probs, int s) {
  double total = 0.0;
  for (double p : probs) total += std::pow(p, s);
  return std::log(total);
}

double oracle_entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

LogProbVector random_point(rng::Stream& stream, int c) {
  std::vector<double> p(c);
  double sum = 0.0;
  for (double& v : p) {
    v = -std::log(stream.uniform_open());
    sum += v;
  }
  for (double& v : p) v /= sum;
  return LogProbVector::from_probabilities(p);
}

}  // namespace

TEST_CASE("logsumexp basics") {
  CHECK(logsumexp(std::vector<double>{0.0}) == doctest::Approx(0.0));
  const double ln_half = std::log(0.5);
  CHECK(std::fabs(logsumexp(std::vector<double>{ln_half, ln_half})) <= 1e-12);
  // max-shift keeps huge inputs finite
  CHECK(logsumexp(std::vector<double>{1000.0, 1000.0}) ==
        doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(logsumexp(std::vector<double>{-kInf, -kInf}) == -kInf);
  CHECK(logsumexp(std::vector<double>{-kInf, 0.0}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(logsumexp(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(logsumexp(std::vector<double>{std::nan("")}),
                  std::invalid_argument);
}

TEST_CASE("log_softmax values and shift invariance") {
  const LogProbVector two = log_softmax(LogitVector{{0.0, 0.0}});
  CHECK(two[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

  const LogProbVector p = log_softmax(LogitVector{{1.0, 0.0, 0.0}});
  const double oracle = std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  CHECK(std::fabs(p[0] - oracle) <= 1e-12);
  CHECK(std::fabs(p[0] - (-0.551445)) <= 1e-6);

  rng::Stream stream(20240801);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 2 + static_cast<int>(stream.below(9));
    LogitVector v;
    for (int i = 0; i < c; ++i) v.values.push_back(5.0 * stream.normal());
    const LogProbVector base = log_softmax(v);
    CHECK(std::fabs(logsumexp(base.values())) <= 1e-12);
    for (double shift : {-100.0, 3.7, 1e5}) {
      LogitVector shifted = v;
      for (double& val : shifted.values) val += shift;
      const LogProbVector moved = log_softmax(shifted);
      // rounding grows with the shifted logit magnitude, a few ulps of |shift|
      const double tol = 1e-12 + 1e-14 * std::fabs(shift);
      for (int i = 0; i < c; ++i)
        CHECK(std::fabs(moved[i] - base[i]) <= tol);
    }
  }

  CHECK_THROWS_AS(log_softmax(LogitVector{{0.0, kInf}}), std::invalid_argument);
  CHECK_THROWS_AS(log_softmax(LogitVector{{0.0, std::nan("")}}),
                  std::invalid_argument);
}

TEST_CASE("LogProbVector validates its invariants") {
  CHECK_THROWS_AS(LogProbVector({0.0}), std::invalid_argument);
  CHECK_THROWS_AS(LogProbVector({-0.5, 1e-3}), std::invalid_argument);
  // normalized but positive-entry-free requirement
  CHECK_THROWS_AS(LogProbVector({-0.1, -0.1}), std::invalid_argument);
  CHECK_NOTHROW(LogProbVector({0.0, -kInf}));  // one-hot
  CHECK_THROWS_AS(LogProbVector({std::nan(""), 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(LogProbVector::from_probabilities(std::vector<double>{0.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("log_consensus_prob worked values") {
  const auto uniform10 =
      LogProbVector::from_probabilities(std::vector<double>(10, 0.1));
  CHECK(std::fabs(log_consensus_prob(uniform10, 3) - (-2.0 * std::log(10.0))) <=
        1e-12);
  CHECK(std::fabs(log_consensus_prob(uniform10, 3) - (-4.605170)) <= 1e-6);

  std::vector<double> hot{0.0, 0.0, 1.0, 0.0};
  CHECK(log_consensus_prob(LogProbVector::from_probabilities(hot), 5) == 0.0);

  const std::vector<double> skew{0.7, 0.2, 0.1};
  const auto p = LogProbVector::from_probabilities(skew);
  CHECK(std::fabs(log_consensus_prob(p, 2) - oracle_consensus(skew, 2)) <=
        1e-12);
  CHECK(std::fabs(log_consensus_prob(p, 2) - (-0.616186)) <= 1e-6);

  CHECK_THROWS_AS(log_consensus_prob(p, 0), std::invalid_argument);
}

TEST_CASE("log_consensus_prob properties") {
  rng::Stream stream(7131);
  for (int trial = 0; trial < 2000; ++trial) {
    const int c = 2 + static_cast<int>(stream.below(9));
    const LogProbVector p = random_point(stream, c);
    double prev = log_consensus_prob(p, 1);
    CHECK(std::fabs(prev) <= 1e-9);  // s = 1: some label always wins
    for (int s = 2; s <= 6; ++s) {
      const double cur = log_consensus_prob(p, s);
      CHECK(cur <= 0.0);
      CHECK(cur <= prev + 1e-12);  // more labelers, less agreement
      prev = cur;
    }
  }
}

TEST_CASE("log_no_consensus_prob worked values and consistency") {
  const auto uniform10 =
      LogProbVector::from_probabilities(std::vector<double>(10, 0.1));
  CHECK(std::fabs(log_no_consensus_prob(uniform10, 3) - std::log(0.99)) <=
        1e-12);
  CHECK(std::fabs(log_no_consensus_prob(uniform10, 3) - (-0.010050)) <= 1e-6);

  const auto p =
      LogProbVector::from_probabilities(std::vector<double>{0.7, 0.2, 0.1});
  CHECK(std::fabs(log_no_consensus_prob(p, 2) - std::log(0.46)) <= 1e-12);
  CHECK(std::fabs(log_no_consensus_prob(p, 2) - (-0.776529)) <= 1e-6);

  bool certain = false;
  const auto hot =
      LogProbVector::from_probabilities(std::vector<double>{1.0, 0.0});
  CHECK(log_no_consensus_prob(hot, 2, &certain) == -kInf);
  CHECK(certain);

  CHECK_THROWS_AS(log_no_consensus_prob(p, 1), std::invalid_argument);

  // exp(consensus) + exp(no consensus) must recover a full probability
  rng::Stream stream(99402);
  for (int trial = 0; trial < 2000; ++trial) {
    const int c = 2 + static_cast<int>(stream.below(9));
    const LogProbVector q = random_point(stream, c);
    const int s = 2 + static_cast<int>(stream.below(5));
    const double total = std::exp(log_consensus_prob(q, s)) +
                         std::exp(log_no_consensus_prob(q, s));
    CHECK(std::fabs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("entropy values and range") {
  const auto hot =
      LogProbVector::from_probabilities(std::vector<double>{0.0, 1.0, 0.0});
  CHECK(entropy(hot) == 0.0);

  for (int c : {2, 5, 17}) {
    const auto uniform =
        LogProbVector::from_probabilities(std::vector<double>(c, 1.0));
    CHECK(std::fabs(entropy(uniform) - std::log(static_cast<double>(c))) <=
          1e-12);
  }

  const std::vector<double> skew{0.7, 0.2, 0.1};
  CHECK(std::fabs(entropy(LogProbVector::from_probabilities(skew)) -
                  oracle_entropy(skew)) <= 1e-9);
  CHECK(std::fabs(entropy(LogProbVector::from_probabilities(skew)) -
                  0.801819) <= 1e-6);

  rng::Stream stream(1234);
  for (int trial = 0; trial < 10000; ++trial) {
    const int c = 2 + static_cast<int>(stream.below(9));
    const LogProbVector p = random_point(stream, c);
    const double h = entropy(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(c)) + 1e-9);
  }
}

TEST_CASE("rng streams are order-independent and tagged") {
  CHECK(rng::derive(1, "a", 0) != rng::derive(1, "b", 0));
  CHECK(rng::derive(1, "a", 0) != rng::derive(1, "a", 1));
  CHECK(rng::derive(1, "a", 0) != rng::derive(2, "a", 0));
  CHECK(rng::derive(1, "a", 5) == rng::derive(1, "a", 5));

  rng::Stream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  rng::Stream u(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    const double w = u.uniform_open();
    CHECK(w > 0.0);
    CHECK(w < 1.0);
  }

  // categorical frequencies within 4 sigma on a fixed seed
  const auto p =
      LogProbVector::from_probabilities(std::vector<double>{0.5, 0.3, 0.2});
  rng::Stream cat(5150);
  std::vector<long> counts(3, 0);
  const long n = 100000;
  for (long i = 0; i < n; ++i) ++counts[cat.categorical_from_log_probs(p.values())];
  const std::vector<double> expect{0.5, 0.3, 0.2};
  for (int i = 0; i < 3; ++i) {
    const double sigma = std::sqrt(expect[i] * (1 - expect[i]) / n);
    CHECK(std::fabs(counts[i] / static_cast<double>(n) - expect[i]) <=
          4.0 * sigma);
  }
}
