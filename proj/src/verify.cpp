#include "cssl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cssl/logprob.hpp"
#include "cssl/objectives.hpp"
#include "cssl/rng.hpp"
#include "cssl/sim.hpp"

namespace cssl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LogProbVector random_simplex_point(rng::Stream& stream, int c) {
  // Flat Dirichlet via normalized exponentials, kept in log space.
  std::vector<double> g(c);
  double sum = 0.0;
  for (double& v : g) {
    v = -std::log(stream.uniform_open());
    sum += v;
  }
  const double log_sum = std::log(sum);
  for (double& v : g) v = std::log(v) - log_sum;
  return LogProbVector(std::move(g));
}

struct Checker {
  CheckResult result;
  double tolerance;

  Checker(std::string name, double tolerance_)
      : tolerance(tolerance_) {
    result.name = std::move(name);
    result.worst_slack = kInf;
  }

  void slack(double value) {
    ++result.checked;
    result.worst_slack = std::min(result.worst_slack, value);
    if (!(value >= -tolerance)) ++result.failures;
  }

  // For equality checks: slack is the negated absolute error.
  void equal(double a, double b) { slack(-std::fabs(a - b)); }

  CheckResult done() {
    if (result.checked == 0) result.worst_slack = 0.0;
    if (std::isinf(result.worst_slack)) result.worst_slack = 0.0;
    return result;
  }
};

}  // namespace

VerifyReport verify_bounds(long samples, std::uint64_t seed,
                           bool corrupt_entropy_bound) {
  const double corruption = corrupt_entropy_bound ? 0.1 : 0.0;
  const int c_choices[] = {2, 10, 100};
  VerifyReport report;
  report.seed = seed;

  {
    Checker entropy_vs_exact("entropy_bound <= unlabelled_exact", 1e-9);
    Checker pseudo_vs_exact("pseudo_label_bound <= unlabelled_exact (all y*)",
                            1e-9);
    for (long i = 0; i < samples; ++i) {
      rng::Stream stream(rng::derive(seed, "bound-chain", i));
      const int c = c_choices[stream.below(3)];
      const int s = 1 + static_cast<int>(stream.below(6));
      const LogProbVector p = random_simplex_point(stream, c);
      const double exact = unlabelled_exact_ll(p, s);
      entropy_vs_exact.slack(exact - (entropy_bound(p, s) + corruption));
      double worst = kInf;
      for (int y = 0; y < c; ++y)
        worst = std::min(worst, exact - pseudo_label_bound(p, y, s));
      pseudo_vs_exact.slack(worst);
    }
    report.checks.push_back(entropy_vs_exact.done());
    report.checks.push_back(pseudo_vs_exact.done());
  }

  {
    Checker tight_uniform("entropy_bound tight at uniform", 1e-9);
    Checker tight_onehot("bounds tight at one-hot", 1e-9);
    for (int c : c_choices) {
      std::vector<double> uniform(c, 1.0);
      const LogProbVector pu = LogProbVector::from_probabilities(uniform);
      std::vector<double> hot(c, 0.0);
      hot[c / 2] = 1.0;
      const LogProbVector ph = LogProbVector::from_probabilities(hot);
      for (int s = 1; s <= 6; ++s) {
        tight_uniform.equal(unlabelled_exact_ll(pu, s),
                            entropy_bound(pu, s) + corruption);
        tight_onehot.equal(unlabelled_exact_ll(ph, s), 0.0);
        tight_onehot.equal(entropy_bound(ph, s) + corruption, 0.0);
        tight_onehot.equal(pseudo_label_bound(ph, c / 2, s), 0.0);
      }
    }
    report.checks.push_back(tight_uniform.done());
    report.checks.push_back(tight_onehot.done());
  }

  {
    Checker multi_vs_single("aug_multi_sample >= aug_single_sample", 1e-12);
    Checker k1_exact("aug bounds coincide at k = 1", 0.0);
    for (long i = 0; i < samples; ++i) {
      rng::Stream stream(rng::derive(seed, "aug-order", i));
      const int c = 2 + static_cast<int>(stream.below(9));
      const int k = 1 + static_cast<int>(stream.below(8));
      std::vector<LogProbVector> rows;
      rows.reserve(k);
      for (int j = 0; j < k; ++j) rows.push_back(random_simplex_point(stream, c));
      const AugmentedLogProbs aug(std::move(rows), AugRole::k_augmentations);
      const int y = static_cast<int>(stream.below(c));
      const double single = aug_supervised_single_sample(aug, y);
      const double multi = aug_supervised_multi_sample(aug, y);
      if (k == 1)
        k1_exact.equal(single, multi);
      else
        multi_vs_single.slack(multi - single);
    }
    report.checks.push_back(multi_vs_single.done());
    report.checks.push_back(k1_exact.done());
  }

  {
    Checker pseudo_vs_jensen("mixmatch_pseudo <= mixmatch_jensen (M=1, all y*)",
                             1e-12);
    for (long i = 0; i < samples; ++i) {
      rng::Stream stream(rng::derive(seed, "mixmatch-order", i));
      const int c = 2 + static_cast<int>(stream.below(9));
      const int s = 1 + static_cast<int>(stream.below(4));
      std::vector<LogProbVector> rows;
      rows.reserve(s);
      for (int j = 0; j < s; ++j) rows.push_back(random_simplex_point(stream, c));
      std::vector<AugmentedLogProbs> tuples;
      tuples.emplace_back(std::move(rows), AugRole::s_tuple);
      const double jensen = mixmatch_jensen_bound(tuples);
      double worst = kInf;
      for (int y = 0; y < c; ++y)
        worst = std::min(worst, jensen - mixmatch_pseudo_bound(tuples, y));
      pseudo_vs_jensen.slack(worst);
    }
    report.checks.push_back(pseudo_vs_jensen.done());
  }

  {
    Checker s1("s = 1 reductions equal zero", 1e-9);
    for (long i = 0; i < samples; ++i) {
      rng::Stream stream(rng::derive(seed, "s1-reduction", i));
      const int c = 2 + static_cast<int>(stream.below(9));
      const LogProbVector p = random_simplex_point(stream, c);
      s1.equal(unlabelled_exact_ll(p, 1), 0.0);
      std::vector<AugmentedLogProbs> tuples;
      tuples.emplace_back(std::vector<LogProbVector>{p}, AugRole::s_tuple);
      s1.equal(mixmatch_jensen_bound(tuples), 0.0);
    }
    report.checks.push_back(s1.done());
  }

  {
    Checker zero_noise("zero-noise mixmatch_jensen equals unlabelled_exact",
                       1e-9);
    for (long i = 0; i < samples; ++i) {
      rng::Stream stream(rng::derive(seed, "zero-noise", i));
      const int c = 2 + static_cast<int>(stream.below(5));
      const int d = 1 + static_cast<int>(stream.below(3));
      const int s = 1 + static_cast<int>(stream.below(4));
      TeacherModel teacher;
      teacher.temperature = 0.3 + 3.0 * stream.uniform();
      for (int cls = 0; cls < c; ++cls) {
        std::vector<double> center(d);
        for (double& v : center) v = 2.0 * stream.normal();
        teacher.class_centers.push_back(std::move(center));
      }
      std::vector<double> z(d);
      for (double& v : z) v = 2.0 * stream.normal();
      const LogProbVector p = teacher_log_probs(teacher, z);
      const int m = 1 + static_cast<int>(stream.below(3));
      std::vector<AugmentedLogProbs> tuples;
      for (int t = 0; t < m; ++t) {
        std::vector<LogProbVector> rows;
        for (int j = 0; j < s; ++j)
          rows.push_back(teacher_log_probs(
              teacher, augment(z, 0.0, rng::derive(seed, "noop", i))));
        tuples.emplace_back(std::move(rows), AugRole::s_tuple);
      }
      zero_noise.equal(mixmatch_jensen_bound(tuples),
                       unlabelled_exact_ll(p, s));
    }
    report.checks.push_back(zero_noise.done());
  }

  for (const auto& check : report.checks)
    report.all_pass = report.all_pass && check.failures == 0;
  return report;
}

}  // namespace cssl
