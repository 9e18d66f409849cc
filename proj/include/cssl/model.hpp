#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cssl/logprob.hpp"
#include "cssl/objectives.hpp"

namespace cssl {

// Fully connected net: affine + tanh on hidden layers, final layer affine.
// Parameters live in one flat vector, per layer W (out x in, row-major)
// followed by b.
struct ModelParams {
  std::vector<double> flat;
  std::vector<int> shapes;  // input dim, hidden widths..., output dim

  bool operator==(const ModelParams&) const = default;
};

struct GradVector {
  std::vector<double> flat;

  bool operator==(const GradVector&) const = default;
};

long param_count(std::span<const int> shapes);

// Weights ~ N(0, 2 / fan_in), biases zero; deterministic in seed.
ModelParams init_params(std::vector<int> shapes, std::uint64_t seed);

LogitVector forward(const ModelParams& params, std::span<const double> x);

// One prepared example for loss_and_grad. The meaning of rows depends on the
// objective kind:
//   supervised_consensus / unlabelled_exact / entropy_bound /
//   pseudo_label_bound: exactly one row, the raw input.
//   aug_single_sample / aug_multi_sample: K augmentation draws.
//   mixmatch_jensen / mixmatch_pseudo: M tuples of S rows, tuple-major; the
//   first row of each tuple is the weak augmentation.
//   no_consensus: the pool batch, with n_rejected set.
// Augmentation draws and pairing happen before this layer; every function
// here is deterministic in its arguments.
struct ObjectiveInput {
  std::vector<std::vector<double>> rows;
  int label = -1;
  long n_rejected = 0;
  double weight = 1.0;
};

// Minimization convention: loss = -sum_i term_weight * weight_i * value_i,
// where value_i is the example's objective value for spec.kind and
// term_weight = spec.weight(term_of(kind)). Gradients are exact reverse-mode
// derivatives of that loss; pseudo-label selections are recomputed fresh and
// held constant within the call (stop-gradient). A -inf objective value
// raises std::runtime_error naming the offending example.
std::pair<double, GradVector> loss_and_grad(const ModelParams& params,
                                            std::span<const ObjectiveInput> batch,
                                            const ObjectiveSpec& spec);

// Central differences on loss_and_grad's value, one coordinate at a time.
GradVector finite_diff_grad(const ModelParams& params,
                            std::span<const ObjectiveInput> batch,
                            const ObjectiveSpec& spec, double step);

}  // namespace cssl
