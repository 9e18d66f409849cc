#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cssl {

// Normalized log-probabilities over C >= 2 classes: entries <= 0 (within
// 1e-9 of rounding), logsumexp == 0 within 1e-6. Entries may be -inf (zero
// probability); NaN is rejected. Construction validates and throws
// std::invalid_argument on violation.
class LogProbVector {
 public:
  explicit LogProbVector(std::vector<double> values);

  // Convenience for tests and teachers: normalizes by the sum, takes logs.
  // Zeros map to -inf.
  static LogProbVector from_probabilities(std::span<const double> probs);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const LogProbVector&) const = default;

 private:
  std::vector<double> values_;
};

// Unnormalized scores; log_softmax validates finiteness.
struct LogitVector {
  std::vector<double> values;

  bool operator==(const LogitVector&) const = default;
};

// Max-shifted log(sum(exp(values))). Empty input throws; all -inf gives
// -inf; NaN entries throw.
double logsumexp(std::span<const double> values);

LogProbVector log_softmax(const LogitVector& logits);

// log P(all s independent draws from p agree) = logsumexp(s * log p).
// s >= 1; clamped into (-inf, 0].
double log_consensus_prob(const LogProbVector& log_p, int s);

// log P(the s draws disagree) = log(1 - exp(log_consensus_prob)).
// Requires s >= 2: a single draw always agrees with itself, so the s = 1
// case is degenerate and rejected. A (numerically) one-hot p makes
// disagreement impossible: the result is -inf and *consensus_certain, when
// given, is set.
double log_no_consensus_prob(const LogProbVector& log_p, int s,
                             bool* consensus_certain = nullptr);

// Shannon entropy in nats, with the 0 * log 0 = 0 convention (entries below
// log-probability -700 contribute nothing).
double entropy(const LogProbVector& log_p);

}  // namespace cssl
