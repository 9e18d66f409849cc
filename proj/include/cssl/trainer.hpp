#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cssl/model.hpp"
#include "cssl/objectives.hpp"
#include "cssl/sim.hpp"

namespace cssl {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  ObjectiveSpec objective;
  AugmentationSpec aug;
  int epochs = 1;
  int batch_size_labelled = 32;
  int batch_size_unlabelled = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::pair<double, double> adam_betas = {0.9, 0.999};
  std::vector<int> hidden = {16};
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);

struct LabelledExample {
  std::vector<double> x;
  int y = 0;

  bool operator==(const LabelledExample&) const = default;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  // Mean per-term objective values: "labelled", "unlabelled", "rejected".
  std::map<std::string, double> term_values;
  double test_accuracy = 0.0;
  double test_multi_sample_ll = 0.0;
  // Kept in memory and in stdout summaries only; output files omit it so
  // reruns stay byte-identical.
  double wall_clock_seconds = 0.0;
};

struct Metrics {
  std::vector<EpochRecord> epochs;
};

// One optimization step's loss: weighted labelled + unlabelled + rejected
// terms, each averaged over its batch. The labelled term scales the
// augmentation bound by s_labelers (all labelers agreed on y). Augmentation
// draws come from seeded streams, so the result is deterministic in
// (inputs, seed). term_values, when given, receives each term's mean
// objective value.
std::pair<double, GradVector> compose_loss(
    const ModelParams& params, std::span<const LabelledExample> labelled,
    std::span<const std::vector<double>> unlabelled,
    std::span<const std::vector<double>> pool, long n_rejected,
    const ObjectiveSpec& spec, const AugmentationSpec& aug, std::uint64_t seed,
    std::map<std::string, double>* term_values = nullptr);

// Minibatch training over the dataset's labelled/unlabelled/pool examples.
// Labelled batches sweep a fresh shuffle each epoch; unlabelled and pool
// batches are resampled every step. test, when given, drives the per-epoch
// evaluation columns; otherwise the labelled training examples stand in.
std::pair<ModelParams, Metrics> train(const CuratedDataset& dataset,
                                      const TrainConfig& config,
                                      std::span<const LabelledExample> test = {});

// (accuracy, multi-sample log-likelihood) on the unaugmented inputs;
// the likelihood uses k_augmentations weak-noise draws per example.
std::pair<double, double> evaluate(const ModelParams& params,
                                   std::span<const LabelledExample> test,
                                   const AugmentationSpec& aug,
                                   std::uint64_t seed = 0);

struct EvalReport {
  double accuracy = 0.0;
  double plain_ll = 0.0;          // no augmentation
  double single_sample_ll = 0.0;  // mean of logs over the k draws
  double multi_sample_ll = 0.0;   // log of mean over the same k draws
};

EvalReport evaluate_report(const ModelParams& params,
                           std::span<const LabelledExample> test,
                           double noise_stddev, int k, std::uint64_t seed);

}  // namespace cssl
