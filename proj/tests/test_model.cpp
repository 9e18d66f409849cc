#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "cssl/model.hpp"
#include "cssl/objectives.hpp"
#include "cssl/rng.hpp"

using namespace cssl;

namespace {

std::vector<double> random_x(rng::Stream& stream, int dim) {
  std::vector<double> x(dim);
  for (double& v : x) v = stream.normal();
  return x;
}

ObjectiveSpec spec_for(ObjectiveKind kind, int s) {
  ObjectiveSpec spec;
  spec.kind = kind;
  spec.s_labelers = s;
  spec.weights["rejected"] = 1.0;  // exercise the rejected term too
  return spec;
}

// One valid input for the kind, rows drawn from stream.
ObjectiveInput input_for(ObjectiveKind kind, int s, int dim, int n_classes,
                         rng::Stream& stream) {
  ObjectiveInput input;
  switch (kind) {
    case ObjectiveKind::supervised_consensus:
    case ObjectiveKind::unlabelled_exact:
    case ObjectiveKind::entropy_bound:
    case ObjectiveKind::pseudo_label_bound:
      input.rows.push_back(random_x(stream, dim));
      break;
    case ObjectiveKind::aug_single_sample:
    case ObjectiveKind::aug_multi_sample:
      for (int k = 0; k < 3; ++k) input.rows.push_back(random_x(stream, dim));
      break;
    case ObjectiveKind::mixmatch_jensen:
    case ObjectiveKind::mixmatch_pseudo:
      for (int r = 0; r < 2 * s; ++r)  // M = 2 tuples of S rows
        input.rows.push_back(random_x(stream, dim));
      break;
    case ObjectiveKind::no_consensus:
      for (int r = 0; r < 5; ++r) input.rows.push_back(random_x(stream, dim));
      input.n_rejected = 7;
      break;
  }
  if (kind == ObjectiveKind::supervised_consensus ||
      kind == ObjectiveKind::aug_single_sample ||
      kind == ObjectiveKind::aug_multi_sample)
    input.label = static_cast<int>(stream.below(n_classes));
  return input;
}

LogProbVector row_log_probs(const ModelParams& params,
                            std::span<const double> x) {
  return log_softmax(forward(params, x));
}

}  // namespace

TEST_CASE("param_count follows the flat layout") {
  CHECK(param_count(std::vector<int>{2, 3}) == 9);
  CHECK(param_count(std::vector<int>{2, 8, 3}) == 51);
  CHECK(param_count(std::vector<int>{4, 16, 16, 5}) ==
        4 * 16 + 16 + 16 * 16 + 16 + 16 * 5 + 5);
  CHECK_THROWS_AS(param_count(std::vector<int>{3}), std::invalid_argument);
  CHECK_THROWS_AS(param_count(std::vector<int>{3, 0}), std::invalid_argument);
}

TEST_CASE("init_params zero biases, seeded weights, fan-in scaling") {
  const auto a = init_params({4, 8, 2}, 11);
  const auto b = init_params({4, 8, 2}, 11);
  CHECK(a == b);
  CHECK(a != init_params({4, 8, 2}, 12));
  REQUIRE(static_cast<long>(a.flat.size()) == param_count(a.shapes));

  // layer 0: W[0..31], b[32..39]; layer 1: W[40..55], b[56..57]
  for (int i = 32; i < 40; ++i) CHECK(a.flat[i] == 0.0);
  for (int i = 56; i < 58; ++i) CHECK(a.flat[i] == 0.0);

  const auto wide = init_params({100, 50}, 5);
  double sq = 0.0;
  for (int i = 0; i < 5000; ++i) sq += wide.flat[i] * wide.flat[i];
  const double sd = std::sqrt(sq / 5000.0);
  CHECK(std::fabs(sd - std::sqrt(2.0 / 100.0)) <= 0.01);
}

TEST_CASE("forward matches hand-computed values") {
  ModelParams affine{{2.0, 0.5}, {1, 1}};
  CHECK(forward(affine, std::vector<double>{1.0}).values[0] ==
        doctest::Approx(2.5).epsilon(1e-15));

  ModelParams deep{{1.0, 0.0, 3.0, -1.0}, {1, 1, 1}};
  const double expect = 3.0 * std::tanh(1.0) - 1.0;
  CHECK(forward(deep, std::vector<double>{1.0}).values[0] ==
        doctest::Approx(expect).epsilon(1e-15));
  CHECK(std::fabs(forward(deep, std::vector<double>{1.0}).values[0] -
                  1.284782) <= 1e-6);

  CHECK_THROWS_WITH_AS(forward(affine, std::vector<double>{1.0, 2.0}),
                       doctest::Contains("dimension mismatch"),
                       std::invalid_argument);
  ModelParams bad{{1.0}, {1, 1}};
  CHECK_THROWS_AS(forward(bad, std::vector<double>{1.0}),
                  std::invalid_argument);
}

TEST_CASE("loss values agree with the objective functions") {
  const int s = 3;
  const ModelParams params = init_params({2, 5, 4}, 31);
  rng::Stream stream(8080);

  for (ObjectiveKind kind :
       {ObjectiveKind::supervised_consensus, ObjectiveKind::unlabelled_exact,
        ObjectiveKind::entropy_bound, ObjectiveKind::aug_multi_sample,
        ObjectiveKind::no_consensus}) {
    ObjectiveSpec spec = spec_for(kind, s);
    const ObjectiveInput input = input_for(kind, s, 2, 4, stream);
    const auto [loss, grad] =
        loss_and_grad(params, std::vector<ObjectiveInput>{input}, spec);

    std::vector<LogProbVector> lp;
    for (const auto& row : input.rows)
      lp.push_back(row_log_probs(params, row));
    double value = 0.0;
    switch (kind) {
      case ObjectiveKind::supervised_consensus:
        value = supervised_consensus_ll(lp[0], input.label, s);
        break;
      case ObjectiveKind::unlabelled_exact:
        value = unlabelled_exact_ll(lp[0], s);
        break;
      case ObjectiveKind::entropy_bound:
        value = entropy_bound(lp[0], s);
        break;
      case ObjectiveKind::aug_multi_sample:
        value = aug_supervised_multi_sample(
            AugmentedLogProbs(lp, AugRole::k_augmentations), input.label);
        break;
      case ObjectiveKind::no_consensus:
        value = no_consensus_ll(lp, s, input.n_rejected);
        break;
      default:
        break;
    }
    CHECK(loss == doctest::Approx(-value).epsilon(1e-12));
  }
}

TEST_CASE("mixmatch loss value matches a direct evaluation") {
  const int s = 2;
  const ModelParams params = init_params({2, 5, 3}, 77);
  rng::Stream stream(4242);
  const ObjectiveInput input =
      input_for(ObjectiveKind::mixmatch_pseudo, s, 2, 3, stream);

  std::vector<LogProbVector> lp;
  for (const auto& row : input.rows) lp.push_back(row_log_probs(params, row));
  const std::size_t m = lp.size() / s;
  std::vector<AugmentedLogProbs> tuples;
  for (std::size_t t = 0; t < m; ++t)
    tuples.push_back(AugmentedLogProbs({lp[t * s], lp[t * s + 1]},
                                       AugRole::s_tuple));

  // label from the mean weak-row probabilities, then frozen
  std::vector<double> mean_prob(3, 0.0);
  for (std::size_t t = 0; t < m; ++t)
    for (int y = 0; y < 3; ++y)
      mean_prob[y] += std::exp(lp[t * s][y]) / static_cast<double>(m);
  int y_star = 0;
  for (int y = 1; y < 3; ++y)
    if (mean_prob[y] > mean_prob[y_star]) y_star = y;

  const ObjectiveSpec spec = spec_for(ObjectiveKind::mixmatch_pseudo, s);
  const auto [loss, grad] =
      loss_and_grad(params, std::vector<ObjectiveInput>{input}, spec);
  CHECK(loss ==
        doctest::Approx(-mixmatch_pseudo_bound(tuples, y_star)).epsilon(1e-12));

  const ObjectiveSpec jspec = spec_for(ObjectiveKind::mixmatch_jensen, s);
  const auto [jloss, jgrad] =
      loss_and_grad(params, std::vector<ObjectiveInput>{input}, jspec);
  CHECK(jloss == doctest::Approx(-mixmatch_jensen_bound(tuples)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central differences for every kind") {
  const std::vector<ObjectiveKind> all{
      ObjectiveKind::supervised_consensus, ObjectiveKind::unlabelled_exact,
      ObjectiveKind::entropy_bound,        ObjectiveKind::pseudo_label_bound,
      ObjectiveKind::aug_single_sample,    ObjectiveKind::aug_multi_sample,
      ObjectiveKind::mixmatch_jensen,      ObjectiveKind::mixmatch_pseudo,
      ObjectiveKind::no_consensus};
  const int s = 2;
  rng::Stream stream(90210);
  for (ObjectiveKind kind : all) {
    CAPTURE(to_string(kind));
    const ModelParams params = init_params({2, 4, 3}, stream.next_u64());
    const ObjectiveSpec spec = spec_for(kind, s);
    const std::vector<ObjectiveInput> batch{input_for(kind, s, 2, 3, stream)};
    const GradVector analytic = loss_and_grad(params, batch, spec).second;
    const GradVector fd = finite_diff_grad(params, batch, spec, 1e-5);
    REQUIRE(analytic.flat.size() == fd.flat.size());
    for (std::size_t i = 0; i < fd.flat.size(); ++i) {
      const double a = analytic.flat[i];
      const double f = fd.flat[i];
      const double err = std::fabs(a - f);
      const double denom = std::max(std::fabs(a), std::fabs(f));
      CAPTURE(i);
      CHECK((err <= 1e-8 || err / denom <= 1e-5));
    }
  }
}

TEST_CASE("batch loss and gradient are sums over examples") {
  const ModelParams params = init_params({2, 4, 3}, 3);
  rng::Stream stream(515);
  const ObjectiveSpec spec = spec_for(ObjectiveKind::unlabelled_exact, 2);
  const ObjectiveInput a = input_for(spec.kind, 2, 2, 3, stream);
  const ObjectiveInput b = input_for(spec.kind, 2, 2, 3, stream);

  const auto joint =
      loss_and_grad(params, std::vector<ObjectiveInput>{a, b}, spec);
  const auto la = loss_and_grad(params, std::vector<ObjectiveInput>{a}, spec);
  const auto lb = loss_and_grad(params, std::vector<ObjectiveInput>{b}, spec);
  CHECK(joint.first ==
        doctest::Approx(la.first + lb.first).epsilon(1e-12));
  for (std::size_t i = 0; i < joint.second.flat.size(); ++i)
    CHECK(std::fabs(joint.second.flat[i] -
                    (la.second.flat[i] + lb.second.flat[i])) <= 1e-10);
}

TEST_CASE("example and term weights scale the loss") {
  const ModelParams params = init_params({2, 4, 3}, 5);
  rng::Stream stream(616);
  ObjectiveSpec spec = spec_for(ObjectiveKind::unlabelled_exact, 2);
  ObjectiveInput input = input_for(spec.kind, 2, 2, 3, stream);

  const auto base =
      loss_and_grad(params, std::vector<ObjectiveInput>{input}, spec);
  input.weight = 2.0;
  const auto doubled =
      loss_and_grad(params, std::vector<ObjectiveInput>{input}, spec);
  CHECK(doubled.first == doctest::Approx(2.0 * base.first).epsilon(1e-15));
  for (std::size_t i = 0; i < base.second.flat.size(); ++i)
    CHECK(doubled.second.flat[i] ==
          doctest::Approx(2.0 * base.second.flat[i]).epsilon(1e-12));

  input.weight = 1.0;
  spec.weights["unlabelled"] = 0.0;
  const auto off =
      loss_and_grad(params, std::vector<ObjectiveInput>{input}, spec);
  CHECK(off.first == 0.0);
  for (double g : off.second.flat) CHECK(g == 0.0);
}

TEST_CASE("pseudo-labels reduce to supervised at the selected argmax") {
  const ModelParams params = init_params({2, 4, 3}, 21);
  rng::Stream stream(717);
  ObjectiveInput input;
  input.rows.push_back(random_x(stream, 2));

  const ObjectiveSpec pseudo = spec_for(ObjectiveKind::pseudo_label_bound, 2);
  const auto p =
      loss_and_grad(params, std::vector<ObjectiveInput>{input}, pseudo);

  const LogProbVector lp = row_log_probs(params, input.rows[0]);
  int y_star = 0;
  for (std::size_t y = 1; y < lp.size(); ++y)
    if (lp[y] > lp[y_star]) y_star = static_cast<int>(y);

  ObjectiveInput labelled = input;
  labelled.label = y_star;
  const ObjectiveSpec sup = spec_for(ObjectiveKind::supervised_consensus, 2);
  const auto q =
      loss_and_grad(params, std::vector<ObjectiveInput>{labelled}, sup);
  CHECK(p.first == doctest::Approx(q.first).epsilon(1e-12));
  for (std::size_t i = 0; i < p.second.flat.size(); ++i)
    CHECK(std::fabs(p.second.flat[i] - q.second.flat[i]) <= 1e-12);
}

TEST_CASE("below-threshold pseudo-labels contribute nothing") {
  const ModelParams params = init_params({2, 4, 3}, 9);
  rng::Stream stream(818);
  ObjectiveInput input;
  input.rows.push_back(random_x(stream, 2));

  ObjectiveSpec spec = spec_for(ObjectiveKind::pseudo_label_bound, 2);
  spec.pseudo_label_threshold = 1.0;  // freshly initialized nets are unsure
  const LogProbVector lp = row_log_probs(params, input.rows[0]);
  double max_prob = 0.0;
  for (std::size_t y = 0; y < lp.size(); ++y)
    max_prob = std::max(max_prob, std::exp(lp[y]));
  REQUIRE(max_prob < 1.0);

  const auto [loss, grad] =
      loss_and_grad(params, std::vector<ObjectiveInput>{input}, spec);
  CHECK(loss == 0.0);
  for (double g : grad.flat) CHECK(g == 0.0);
}

TEST_CASE("certain-consensus pool makes the rejected term -inf") {
  // Affine net with a huge margin: the softmax is one-hot to double
  // precision, so disagreement has probability zero.
  ModelParams params{{100.0, 0.0, -100.0, 0.0, 0.0, 0.0}, {2, 2}};
  ObjectiveInput input;
  input.rows.push_back({1.0, 0.0});
  input.n_rejected = 1;
  const ObjectiveSpec spec = spec_for(ObjectiveKind::no_consensus, 2);
  CHECK_THROWS_WITH_AS(
      loss_and_grad(params, std::vector<ObjectiveInput>{input}, spec),
      doctest::Contains("example 0"), std::runtime_error);
}

TEST_CASE("input validation errors") {
  const ModelParams params = init_params({2, 4, 3}, 1);
  const ObjectiveSpec spec = spec_for(ObjectiveKind::unlabelled_exact, 2);
  CHECK_THROWS_AS(loss_and_grad(params, std::vector<ObjectiveInput>{}, spec),
                  std::invalid_argument);

  ObjectiveInput no_rows;
  CHECK_THROWS_WITH_AS(
      loss_and_grad(params, std::vector<ObjectiveInput>{no_rows}, spec),
      doctest::Contains("no rows"), std::invalid_argument);

  ObjectiveInput unlabelled;
  unlabelled.rows.push_back({0.5, 0.5});
  const ObjectiveSpec sup = spec_for(ObjectiveKind::supervised_consensus, 2);
  CHECK_THROWS_WITH_AS(
      loss_and_grad(params, std::vector<ObjectiveInput>{unlabelled}, sup),
      doctest::Contains("label"), std::invalid_argument);

  ObjectiveInput ragged;  // 3 rows cannot split into tuples of 2
  ragged.rows = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}};
  const ObjectiveSpec mix = spec_for(ObjectiveKind::mixmatch_jensen, 2);
  CHECK_THROWS_WITH_AS(
      loss_and_grad(params, std::vector<ObjectiveInput>{ragged}, mix),
      doctest::Contains("tuples"), std::invalid_argument);

  CHECK_THROWS_AS(finite_diff_grad(params, std::vector<ObjectiveInput>{}, spec,
                                   0.0),
                  std::invalid_argument);
}

TEST_CASE("loss_and_grad is deterministic") {
  const ModelParams params = init_params({2, 4, 3}, 99);
  rng::Stream stream(919);
  const ObjectiveSpec spec = spec_for(ObjectiveKind::mixmatch_jensen, 2);
  const std::vector<ObjectiveInput> batch{
      input_for(spec.kind, 2, 2, 3, stream)};
  const auto a = loss_and_grad(params, batch, spec);
  const auto b = loss_and_grad(params, batch, spec);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
