#include "cssl/logprob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cssl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.6931471805599453;

// Entries below this are treated as exactly zero probability.
constexpr double kZeroLogProb = -700.0;

// log_consensus_prob above this counts as certain agreement (one-hot p).
constexpr double kOneHotTol = -1e-12;

// log(1 - e^x) for x <= 0. The two forms lose precision at opposite ends:
// expm1 near x = 0, exp near x = -inf.
double log1m_exp(double x) {
  if (x > -kLn2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

}  // namespace

LogProbVector::LogProbVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.size() < 2)
    throw std::invalid_argument("LogProbVector: need at least 2 classes");
  for (double v : values_) {
    if (std::isnan(v) || v > 1e-9)
      throw std::invalid_argument(
          "LogProbVector: entries must be log-probabilities <= 0");
  }
  const double z = logsumexp(values_);
  if (!(std::fabs(z) <= 1e-6))
    throw std::invalid_argument("LogProbVector: not normalized, logsumexp = " +
                                std::to_string(z));
}

LogProbVector LogProbVector::from_probabilities(std::span<const double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0)
      throw std::invalid_argument(
          "LogProbVector: probabilities must be finite and >= 0");
    sum += p;
  }
  if (sum <= 0.0)
    throw std::invalid_argument("LogProbVector: probabilities sum to zero");
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(p > 0.0 ? std::log(p / sum) : -kInf);
  return LogProbVector(std::move(out));
}

double logsumexp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("logsumexp: empty input");
  double m = -kInf;
  for (double v : values) {
    if (std::isnan(v)) throw std::invalid_argument("logsumexp: NaN input");
    m = std::max(m, v);
  }
  if (m == -kInf) return -kInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

LogProbVector log_softmax(const LogitVector& logits) {
  for (double v : logits.values) {
    if (!std::isfinite(v))
      throw std::invalid_argument("log_softmax: non-finite logits");
  }
  const double lse = logsumexp(logits.values);
  std::vector<double> out(logits.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits.values[i] - lse;
  return LogProbVector(std::move(out));
}

double log_consensus_prob(const LogProbVector& log_p, int s) {
  if (s < 1) throw std::invalid_argument("log_consensus_prob: s must be >= 1");
  std::vector<double> scaled(log_p.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = s * log_p[i];
  // Clamp rounding noise: the true value never exceeds 0, and downstream
  // log(1 - e^x) needs x <= 0.
  return std::min(logsumexp(scaled), 0.0);
}

double log_no_consensus_prob(const LogProbVector& log_p, int s,
                             bool* consensus_certain) {
  if (s < 2)
    throw std::invalid_argument(
        "log_no_consensus_prob: s must be >= 2, a single draw cannot disagree");
  if (consensus_certain) *consensus_certain = false;
  const double lcp = log_consensus_prob(log_p, s);
  if (lcp > kOneHotTol) {
    if (consensus_certain) *consensus_certain = true;
    return -kInf;
  }
  return log1m_exp(lcp);
}

double entropy(const LogProbVector& log_p) {
  double h = 0.0;
  for (double lp : log_p.values()) {
    if (lp < kZeroLogProb) continue;
    h -= std::exp(lp) * lp;
  }
  return std::max(h, 0.0);
}

}  // namespace cssl
