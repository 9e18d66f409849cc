#include "cssl/objectives.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cssl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

void check_label(const LogProbVector& log_p, int y, const char* who) {
  require(y >= 0 && y < static_cast<int>(log_p.size()),
          std::string(who) + ": label out of range");
}

void check_tuples(std::span<const AugmentedLogProbs> tuples, const char* who) {
  require(!tuples.empty(), std::string(who) + ": need at least one tuple");
  const std::size_t s = tuples.front().rows().size();
  const std::size_t c = tuples.front().n_classes();
  for (const auto& tuple : tuples) {
    require(tuple.role() == AugRole::s_tuple,
            std::string(who) + ": tuples must have role s_tuple");
    require(tuple.rows().size() == s,
            std::string(who) + ": tuples must have equal row counts");
    require(tuple.n_classes() == c,
            std::string(who) + ": inconsistent class count across tuples");
  }
}

}  // namespace

const char* to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::supervised_consensus: return "supervised_consensus";
    case ObjectiveKind::unlabelled_exact: return "unlabelled_exact";
    case ObjectiveKind::entropy_bound: return "entropy_bound";
    case ObjectiveKind::pseudo_label_bound: return "pseudo_label_bound";
    case ObjectiveKind::aug_single_sample: return "aug_single_sample";
    case ObjectiveKind::aug_multi_sample: return "aug_multi_sample";
    case ObjectiveKind::mixmatch_jensen: return "mixmatch_jensen";
    case ObjectiveKind::mixmatch_pseudo: return "mixmatch_pseudo";
    case ObjectiveKind::no_consensus: return "no_consensus";
  }
  return "unknown";
}

std::optional<ObjectiveKind> objective_kind_from_string(std::string_view name) {
  for (ObjectiveKind kind :
       {ObjectiveKind::supervised_consensus, ObjectiveKind::unlabelled_exact,
        ObjectiveKind::entropy_bound, ObjectiveKind::pseudo_label_bound,
        ObjectiveKind::aug_single_sample, ObjectiveKind::aug_multi_sample,
        ObjectiveKind::mixmatch_jensen, ObjectiveKind::mixmatch_pseudo,
        ObjectiveKind::no_consensus}) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

const char* term_of(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::supervised_consensus:
    case ObjectiveKind::aug_single_sample:
    case ObjectiveKind::aug_multi_sample:
      return "labelled";
    case ObjectiveKind::no_consensus:
      return "rejected";
    default:
      return "unlabelled";
  }
}

double ObjectiveSpec::weight(const std::string& term) const {
  const auto it = weights.find(term);
  if (it != weights.end()) return it->second;
  return term == "rejected" ? 0.0 : 1.0;
}

void ObjectiveSpec::validate() const {
  require(s_labelers >= 1, "ObjectiveSpec.s_labelers: must be >= 1");
  require(pseudo_label_threshold >= 0.0 && pseudo_label_threshold <= 1.0,
          "ObjectiveSpec.pseudo_label_threshold: must lie in [0, 1]");
  require(supervised_kind == ObjectiveKind::aug_single_sample ||
              supervised_kind == ObjectiveKind::aug_multi_sample,
          "ObjectiveSpec.supervised_kind: must be aug_single_sample or "
          "aug_multi_sample");
  for (const auto& [term, w] : weights) {
    require(term == "labelled" || term == "unlabelled" || term == "rejected",
            "ObjectiveSpec.weights: unknown term '" + term + "'");
    require(std::isfinite(w) && w >= 0.0,
            "ObjectiveSpec.weights: weight for '" + term +
                "' must be a non-negative real");
  }
}

AugmentedLogProbs::AugmentedLogProbs(std::vector<LogProbVector> rows,
                                     AugRole role)
    : rows_(std::move(rows)), role_(role) {
  require(!rows_.empty(), "AugmentedLogProbs: need at least one row");
  for (const auto& row : rows_) {
    require(row.size() == rows_.front().size(),
            "AugmentedLogProbs: inconsistent class count across rows");
  }
}

double supervised_consensus_ll(const LogProbVector& log_p, int y, int s) {
  require(s >= 1, "supervised_consensus_ll: s must be >= 1");
  check_label(log_p, y, "supervised_consensus_ll");
  return s * log_p[y];
}

double unlabelled_exact_ll(const LogProbVector& log_p, int s) {
  return log_consensus_prob(log_p, s);
}

double entropy_bound(const LogProbVector& log_p, int s) {
  require(s >= 1, "entropy_bound: s must be >= 1");
  return -(s - 1) * entropy(log_p);
}

double pseudo_label_bound(const LogProbVector& log_p, int y_star, int s) {
  require(s >= 1, "pseudo_label_bound: s must be >= 1");
  check_label(log_p, y_star, "pseudo_label_bound");
  return s * log_p[y_star];
}

PseudoLabel select_pseudo_label(const LogProbVector& log_p, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0,
          "select_pseudo_label: threshold must lie in [0, 1]");
  std::size_t best = 0;
  for (std::size_t i = 1; i < log_p.size(); ++i) {
    if (log_p[i] > log_p[best]) best = i;
  }
  const double confidence = std::min(std::exp(log_p[best]), 1.0);
  return PseudoLabel{static_cast<int>(best), confidence,
                     confidence >= threshold};
}

double aug_supervised_single_sample(const AugmentedLogProbs& aug, int y) {
  require(aug.role() == AugRole::k_augmentations,
          "aug_supervised_single_sample: expected role k_augmentations");
  check_label(aug.rows().front(), y, "aug_supervised_single_sample");
  double sum = 0.0;
  for (const auto& row : aug.rows()) sum += row[y];
  return sum / static_cast<double>(aug.rows().size());
}

double aug_supervised_multi_sample(const AugmentedLogProbs& aug, int y) {
  require(aug.role() == AugRole::k_augmentations,
          "aug_supervised_multi_sample: expected role k_augmentations");
  check_label(aug.rows().front(), y, "aug_supervised_multi_sample");
  std::vector<double> values;
  values.reserve(aug.rows().size());
  for (const auto& row : aug.rows()) values.push_back(row[y]);
  return logsumexp(values) - std::log(static_cast<double>(values.size()));
}

double mixmatch_jensen_bound(std::span<const AugmentedLogProbs> tuples) {
  check_tuples(tuples, "mixmatch_jensen_bound");
  double sum = 0.0;
  for (const auto& tuple : tuples) {
    std::vector<double> joint(tuple.n_classes(), 0.0);
    for (const auto& row : tuple.rows()) {
      for (std::size_t y = 0; y < joint.size(); ++y) joint[y] += row[y];
    }
    sum += logsumexp(joint);
  }
  return sum / static_cast<double>(tuples.size());
}

double mixmatch_pseudo_bound(std::span<const AugmentedLogProbs> tuples,
                             int y_star) {
  check_tuples(tuples, "mixmatch_pseudo_bound");
  check_label(tuples.front().rows().front(), y_star, "mixmatch_pseudo_bound");
  std::vector<double> per_tuple;
  per_tuple.reserve(tuples.size());
  for (const auto& tuple : tuples) {
    double joint = 0.0;
    for (const auto& row : tuple.rows()) joint += row[y_star];
    per_tuple.push_back(joint);
  }
  return logsumexp(per_tuple) - std::log(static_cast<double>(per_tuple.size()));
}

double no_consensus_ll(std::span<const LogProbVector> pool_log_p, int s,
                       long n_rejected, bool* zero_rejection_prob) {
  require(!pool_log_p.empty(), "no_consensus_ll: pool must be non-empty");
  require(s >= 2, "no_consensus_ll: s must be >= 2");
  require(n_rejected >= 0, "no_consensus_ll: n_rejected must be >= 0");
  if (zero_rejection_prob) *zero_rejection_prob = false;
  std::vector<double> per_point;
  per_point.reserve(pool_log_p.size());
  for (const auto& log_p : pool_log_p)
    per_point.push_back(log_no_consensus_prob(log_p, s));
  const double log_mean =
      logsumexp(per_point) - std::log(static_cast<double>(per_point.size()));
  if (log_mean == -kInf && zero_rejection_prob) *zero_rejection_prob = true;
  if (n_rejected == 0) return 0.0;
  return static_cast<double>(n_rejected) * log_mean;
}

}  // namespace cssl
