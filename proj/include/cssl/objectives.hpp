#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cssl/logprob.hpp"

namespace cssl {

// The objective family. All values are log-likelihood contributions or lower
// bounds on them: larger is better, and the trainer negates them.
//
//   supervised_consensus  s * log p_y            (all s labels agreed on y)
//   unlabelled_exact      log sum_y p_y^s        (some label won consensus)
//   entropy_bound         (s-1) * sum_y p_y log p_y, a lower bound on the
//                         exact term: scaled negative entropy
//   pseudo_label_bound    s * log p_{y*}, a lower bound for any fixed y*
//   aug_single_sample     mean_k log p_y(z_k) over k augmentation draws
//   aug_multi_sample      log mean_k p_y(z_k), tighter than single-sample
//   mixmatch_jensen       mean over tuples of log sum_y prod_s p_y(z_s)
//   mixmatch_pseudo       log mean over tuples of prod_s p_{y*}(z_s)
//   no_consensus          n_rejected * log-mean disagreement probability
//                         over a pool of raw draws
enum class ObjectiveKind {
  supervised_consensus,
  unlabelled_exact,
  entropy_bound,
  pseudo_label_bound,
  aug_single_sample,
  aug_multi_sample,
  mixmatch_jensen,
  mixmatch_pseudo,
  no_consensus,
};

const char* to_string(ObjectiveKind kind);
std::optional<ObjectiveKind> objective_kind_from_string(std::string_view name);

// Loss terms a kind contributes to: "labelled", "unlabelled", or "rejected".
const char* term_of(ObjectiveKind kind);

struct ObjectiveSpec {
  // Unlabelled-data objective. supervised_consensus, aug_single_sample and
  // aug_multi_sample mean supervised-only training (no unlabelled term).
  ObjectiveKind kind = ObjectiveKind::supervised_consensus;
  // Route for the labelled-data term when training with augmentation.
  ObjectiveKind supervised_kind = ObjectiveKind::aug_single_sample;
  int s_labelers = 1;
  double pseudo_label_threshold = 0.0;
  // Term name -> non-negative weight. Defaults: labelled 1, unlabelled 1,
  // rejected 0.
  std::map<std::string, double> weights;

  double weight(const std::string& term) const;
  void validate() const;

  bool operator==(const ObjectiveSpec&) const = default;
};

enum class AugRole { k_augmentations, s_tuple };

// Per-draw class log-probabilities for one example's augmentations: K
// independent draws, or the S rows of one labeler tuple.
struct AugmentedLogProbs {
  AugmentedLogProbs(std::vector<LogProbVector> rows, AugRole role);

  std::span<const LogProbVector> rows() const { return rows_; }
  AugRole role() const { return role_; }
  std::size_t n_classes() const { return rows_.front().size(); }

 private:
  std::vector<LogProbVector> rows_;
  AugRole role_;
};

struct PseudoLabel {
  int label = 0;
  double confidence = 0.0;
  bool accepted = false;
};

double supervised_consensus_ll(const LogProbVector& log_p, int y, int s);

double unlabelled_exact_ll(const LogProbVector& log_p, int s);

double entropy_bound(const LogProbVector& log_p, int s);

double pseudo_label_bound(const LogProbVector& log_p, int y_star, int s);

// argmax with ties broken toward the lowest index; confidence is the argmax
// probability; accepted iff confidence >= threshold.
PseudoLabel select_pseudo_label(const LogProbVector& log_p, double threshold);

double aug_supervised_single_sample(const AugmentedLogProbs& aug, int y);

double aug_supervised_multi_sample(const AugmentedLogProbs& aug, int y);

// tuples: M draws of S-row labeler tuples (role s_tuple, equal row counts
// and class counts throughout).
double mixmatch_jensen_bound(std::span<const AugmentedLogProbs> tuples);

double mixmatch_pseudo_bound(std::span<const AugmentedLogProbs> tuples,
                             int y_star);

// n_rejected * (log-mean over the pool of per-point disagreement
// probability). n_rejected = 0 returns exactly 0. When every pool point is
// one-hot the model assigns zero rejection probability: the result is -inf
// and *zero_rejection_prob, when given, is set.
double no_consensus_ll(std::span<const LogProbVector> pool_log_p, int s,
                       long n_rejected, bool* zero_rejection_prob = nullptr);

}  // namespace cssl
