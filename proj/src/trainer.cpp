#include "cssl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cssl/rng.hpp"

namespace cssl {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

bool has_unlabelled_term(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::unlabelled_exact:
    case ObjectiveKind::entropy_bound:
    case ObjectiveKind::pseudo_label_bound:
    case ObjectiveKind::mixmatch_jensen:
    case ObjectiveKind::mixmatch_pseudo:
      return true;
    default:
      return false;
  }
}

// kind aug_single/aug_multi overrides the supervised route and means
// supervised-only training.
ObjectiveKind supervised_route(const ObjectiveSpec& spec) {
  if (spec.kind == ObjectiveKind::aug_single_sample ||
      spec.kind == ObjectiveKind::aug_multi_sample)
    return spec.kind;
  return spec.supervised_kind;
}

std::uint64_t step_key(int epoch, long step) {
  return (static_cast<std::uint64_t>(epoch) << 32) ^
         static_cast<std::uint64_t>(step);
}

struct Optimizer {
  const TrainConfig& config;
  std::vector<double> m, v;
  long t = 0;

  explicit Optimizer(const TrainConfig& config_, std::size_t n)
      : config(config_) {
    if (config.optimizer == OptimizerKind::adam) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
    }
  }

  void step(ModelParams& params, const GradVector& grad) {
    const double lr = config.learning_rate;
    if (config.optimizer == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params.flat.size(); ++i)
        params.flat[i] -= lr * grad.flat[i];
      return;
    }
    const auto [beta1, beta2] = config.adam_betas;
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.flat.size(); ++i) {
      const double g = grad.flat[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      params.flat[i] -=
          lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
    }
  }
};

}  // namespace

void validate(const TrainConfig& config) {
  config.objective.validate();
  validate(config.aug);
  require(config.epochs >= 1, "TrainConfig.epochs: must be >= 1");
  require(config.batch_size_labelled >= 1,
          "TrainConfig.batch_size_labelled: must be >= 1");
  require(config.batch_size_unlabelled >= 1,
          "TrainConfig.batch_size_unlabelled: must be >= 1");
  require(std::isfinite(config.learning_rate) && config.learning_rate >= 0.0,
          "TrainConfig.learning_rate: must be a non-negative real");
  require(config.adam_betas.first >= 0.0 && config.adam_betas.first < 1.0 &&
              config.adam_betas.second >= 0.0 && config.adam_betas.second < 1.0,
          "TrainConfig.adam_betas: must lie in [0, 1)");
  for (int h : config.hidden)
    require(h >= 1, "TrainConfig.hidden: widths must be >= 1");
}

std::pair<double, GradVector> compose_loss(
    const ModelParams& params, std::span<const LabelledExample> labelled,
    std::span<const std::vector<double>> unlabelled,
    std::span<const std::vector<double>> pool, long n_rejected,
    const ObjectiveSpec& spec, const AugmentationSpec& aug, std::uint64_t seed,
    std::map<std::string, double>* term_values) {
  spec.validate();
  validate(aug);
  require(n_rejected >= 0, "compose_loss: n_rejected must be >= 0");

  const double w_lab = spec.weight("labelled");
  const double w_unlab = spec.weight("unlabelled");
  const double w_rej = spec.weight("rejected");

  double loss = 0.0;
  GradVector grad;
  grad.flat.assign(params.flat.size(), 0.0);
  if (term_values)
    *term_values = {{"labelled", 0.0}, {"unlabelled", 0.0}, {"rejected", 0.0}};
  bool any_term = false;

  auto accumulate = [&](const char* term, double weight,
                        std::span<const ObjectiveInput> batch,
                        const ObjectiveSpec& term_spec) {
    const auto [term_loss, term_grad] = loss_and_grad(params, batch, term_spec);
    loss += term_loss;
    for (std::size_t i = 0; i < grad.flat.size(); ++i)
      grad.flat[i] += term_grad.flat[i];
    if (term_values) (*term_values)[term] = -term_loss / weight;
    any_term = true;
  };

  if (w_lab != 0.0 && !labelled.empty()) {
    ObjectiveSpec term_spec = spec;
    term_spec.kind = supervised_route(spec);
    const int k = aug.k_augmentations;
    std::vector<ObjectiveInput> batch;
    batch.reserve(labelled.size());
    for (std::size_t i = 0; i < labelled.size(); ++i) {
      ObjectiveInput input;
      input.label = labelled[i].y;
      // All s labelers agreed, so the augmentation bound enters to the
      // s-th power.
      input.weight = static_cast<double>(spec.s_labelers) /
                     static_cast<double>(labelled.size());
      input.rows.reserve(k);
      for (int j = 0; j < k; ++j) {
        input.rows.push_back(
            augment(labelled[i].x, aug.noise_stddev_weak,
                    rng::derive(seed, "aug-labelled",
                                static_cast<std::uint64_t>(i) * k + j)));
      }
      batch.push_back(std::move(input));
    }
    accumulate("labelled", w_lab, batch, term_spec);
  }

  if (w_unlab != 0.0 && has_unlabelled_term(spec.kind) && !unlabelled.empty()) {
    const bool mixmatch = spec.kind == ObjectiveKind::mixmatch_jensen ||
                          spec.kind == ObjectiveKind::mixmatch_pseudo;
    std::vector<ObjectiveInput> batch;
    batch.reserve(unlabelled.size());
    for (std::size_t i = 0; i < unlabelled.size(); ++i) {
      ObjectiveInput input;
      input.weight = 1.0 / static_cast<double>(unlabelled.size());
      if (!mixmatch) {
        input.rows.push_back(unlabelled[i]);
      } else {
        // M tuples of S rows; the first row of each tuple is the weak draw.
        const int m = aug.m_tuples;
        const int s = spec.s_labelers;
        input.rows.reserve(static_cast<std::size_t>(m) * s);
        for (int t = 0; t < m; ++t) {
          for (int j = 0; j < s; ++j) {
            const double stddev =
                j == 0 ? aug.noise_stddev_weak : aug.noise_stddev_strong;
            const std::uint64_t index =
                (static_cast<std::uint64_t>(i) * m + t) * s + j;
            input.rows.push_back(augment(unlabelled[i], stddev,
                                         rng::derive(seed, "aug-unlabelled",
                                                     index)));
          }
        }
      }
      batch.push_back(std::move(input));
    }
    accumulate("unlabelled", w_unlab, batch, spec);
  }

  if (w_rej != 0.0 && !pool.empty()) {
    ObjectiveSpec term_spec = spec;
    term_spec.kind = ObjectiveKind::no_consensus;
    ObjectiveInput input;
    input.n_rejected = n_rejected;
    input.weight = 1.0 / static_cast<double>(pool.size());
    input.rows.assign(pool.begin(), pool.end());
    std::vector<ObjectiveInput> batch;
    batch.push_back(std::move(input));
    accumulate("rejected", w_rej, batch, term_spec);
  }

  if (!any_term)
    throw std::invalid_argument(
        "compose_loss: every term is empty or zero-weighted");
  return {loss, grad};
}

std::pair<ModelParams, Metrics> train(const CuratedDataset& dataset,
                                      const TrainConfig& config,
                                      std::span<const LabelledExample> test) {
  validate(config);
  validate(dataset.config);

  std::vector<LabelledExample> labelled;
  std::vector<std::vector<double>> unlabelled, pool;
  for (const auto& example : dataset.examples) {
    switch (example.kind) {
      case ExampleKind::labelled:
        labelled.push_back({*example.x, *example.y});
        break;
      case ExampleKind::unlabelled:
        unlabelled.push_back(*example.x);
        break;
      case ExampleKind::pool:
        pool.push_back(*example.x);
        break;
      case ExampleKind::rejected:
        break;
    }
  }
  if (labelled.empty())
    throw std::invalid_argument("train: dataset has no labelled examples");

  std::vector<int> shapes;
  shapes.push_back(dataset.config.dim);
  shapes.insert(shapes.end(), config.hidden.begin(), config.hidden.end());
  shapes.push_back(dataset.config.n_classes);
  ModelParams params =
      init_params(shapes, rng::derive(config.seed, "init", 0));
  Optimizer optimizer(config, params.flat.size());

  std::vector<LabelledExample> eval_set(test.begin(), test.end());
  if (eval_set.empty()) eval_set = labelled;

  const double w_rej = config.objective.weight("rejected");
  const long b_lab = config.batch_size_labelled;
  const long b_unlab = config.batch_size_unlabelled;

  Metrics metrics;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(labelled.size());
    std::iota(order.begin(), order.end(), 0);
    {
      rng::Stream stream(rng::derive(config.seed, "shuffle", epoch));
      rng::shuffle(order, stream);
    }
    const long steps =
        (static_cast<long>(labelled.size()) + b_lab - 1) / b_lab;
    double loss_sum = 0.0;
    std::map<std::string, double> term_sums{
        {"labelled", 0.0}, {"unlabelled", 0.0}, {"rejected", 0.0}};

    for (long step = 0; step < steps; ++step) {
      std::vector<LabelledExample> lab_batch;
      for (long i = step * b_lab;
           i < std::min<long>((step + 1) * b_lab, labelled.size()); ++i)
        lab_batch.push_back(labelled[order[i]]);

      std::vector<std::vector<double>> unlab_batch;
      if (!unlabelled.empty() && has_unlabelled_term(config.objective.kind) &&
          config.objective.weight("unlabelled") != 0.0) {
        rng::Stream stream(rng::derive(config.seed, "batch-unlabelled",
                                       step_key(epoch, step)));
        for (long i = 0; i < b_unlab; ++i)
          unlab_batch.push_back(unlabelled[stream.below(unlabelled.size())]);
      }

      std::vector<std::vector<double>> pool_batch;
      if (!pool.empty() && w_rej != 0.0) {
        rng::Stream stream(
            rng::derive(config.seed, "batch-pool", step_key(epoch, step)));
        for (long i = 0; i < b_unlab; ++i)
          pool_batch.push_back(pool[stream.below(pool.size())]);
      }

      std::map<std::string, double> term_values;
      double loss = 0.0;
      GradVector grad;
      try {
        std::tie(loss, grad) = compose_loss(
            params, lab_batch, unlab_batch, pool_batch, dataset.n_rejected,
            config.objective, config.aug,
            rng::derive(config.seed, "augdraw", step_key(epoch, step)),
            &term_values);
      } catch (const std::exception& e) {
        throw std::runtime_error("train: failed at epoch " +
                                 std::to_string(epoch) + " step " +
                                 std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(loss)) {
        std::string bad;
        for (const auto& [term, value] : term_values)
          if (!std::isfinite(value)) bad += (bad.empty() ? "" : ", ") + term;
        throw std::runtime_error(
            "train: loss diverged (non-finite) at epoch " +
            std::to_string(epoch) + " step " + std::to_string(step) +
            (bad.empty() ? "" : " in term(s) " + bad));
      }
      loss_sum += loss;
      for (auto& [term, sum] : term_sums) sum += term_values[term];
      optimizer.step(params, grad);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(steps);
    for (const auto& [term, sum] : term_sums)
      record.term_values[term] = sum / static_cast<double>(steps);
    std::tie(record.test_accuracy, record.test_multi_sample_ll) = evaluate(
        params, eval_set, config.aug, rng::derive(config.seed, "eval", epoch));
    record.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    metrics.epochs.push_back(std::move(record));
  }
  return {params, metrics};
}

std::pair<double, double> evaluate(const ModelParams& params,
                                   std::span<const LabelledExample> test,
                                   const AugmentationSpec& aug,
                                   std::uint64_t seed) {
  validate(aug);
  const EvalReport report = evaluate_report(
      params, test, aug.noise_stddev_weak, aug.k_augmentations, seed);
  return {report.accuracy, report.multi_sample_ll};
}

EvalReport evaluate_report(const ModelParams& params,
                           std::span<const LabelledExample> test,
                           double noise_stddev, int k, std::uint64_t seed) {
  if (test.empty())
    throw std::invalid_argument("evaluate: test set must be non-empty");
  if (k < 1) throw std::invalid_argument("evaluate: k must be >= 1");
  EvalReport report;
  long correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& example = test[i];
    const LogitVector logits = forward(params, example.x);
    const LogProbVector lp = log_softmax(logits);
    if (example.y < 0 || example.y >= static_cast<int>(lp.size()))
      throw std::invalid_argument("evaluate: label out of range");
    std::size_t best = 0;
    for (std::size_t y = 1; y < lp.size(); ++y)
      if (lp[y] > lp[best]) best = y;
    if (static_cast<int>(best) == example.y) ++correct;
    report.plain_ll += lp[example.y];

    std::vector<LogProbVector> rows;
    rows.reserve(k);
    for (int j = 0; j < k; ++j) {
      const auto z = augment(example.x, noise_stddev,
                             rng::derive(seed, "eval-aug",
                                         static_cast<std::uint64_t>(i) * k + j));
      rows.push_back(log_softmax(forward(params, z)));
    }
    const AugmentedLogProbs draws(std::move(rows), AugRole::k_augmentations);
    report.single_sample_ll += aug_supervised_single_sample(draws, example.y);
    report.multi_sample_ll += aug_supervised_multi_sample(draws, example.y);
  }
  const double n = static_cast<double>(test.size());
  report.accuracy = static_cast<double>(correct) / n;
  report.plain_ll /= n;
  report.single_sample_ll /= n;
  report.multi_sample_ll /= n;
  return report;
}

}  // namespace cssl
