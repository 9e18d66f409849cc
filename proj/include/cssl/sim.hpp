#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cssl/logprob.hpp"

namespace cssl {

// A draw from the underlying distribution before any labelling happened.
struct UnderlyingPoint {
  std::vector<double> z;
  int true_class = 0;

  bool operator==(const UnderlyingPoint&) const = default;
};

// Softmax teacher: p(y | z) proportional to exp(-||z - center_y||^2 / T).
struct TeacherModel {
  std::vector<std::vector<double>> class_centers;
  double temperature = 1.0;

  bool operator==(const TeacherModel&) const = default;
};

struct CurationConfig {
  int s_labelers = 1;
  int n_classes = 2;
  int dim = 1;
  TeacherModel teacher;
  double mixture_stddev = 1.0;      // equal-weight Gaussian mixture spread
  double labelled_fraction = 1.0;   // share of consensus examples keeping y
  long n_draws = 1;
  std::uint64_t seed = 0;

  bool operator==(const CurationConfig&) const = default;
};

// Throws std::invalid_argument naming the offending field.
void validate(const CurationConfig& config);

enum class ExampleKind { labelled, unlabelled, rejected, pool };

// labelled:   x and y present.
// unlabelled: x present, y stripped.
// rejected:   neither survives curation; kept in memory as a placeholder so
//             the rejected count stays auditable (files store only the count).
// pool:       raw draw kept for estimating the disagreement term; x only.
struct CuratedExample {
  std::optional<std::vector<double>> x;
  std::optional<int> y;
  ExampleKind kind = ExampleKind::rejected;

  bool operator==(const CuratedExample&) const = default;
};

struct CuratedDataset {
  std::vector<CuratedExample> examples;
  long n_rejected = 0;
  CurationConfig config;

  bool operator==(const CuratedDataset&) const = default;
};

struct AugmentationSpec {
  double noise_stddev_weak = 0.0;
  double noise_stddev_strong = 0.0;
  int k_augmentations = 1;
  int m_tuples = 1;

  bool operator==(const AugmentationSpec&) const = default;
};

void validate(const AugmentationSpec& aug);

// n independent mixture draws; per-item streams derived from (seed,
// "underlying", i), so the result is order-independent and reproducible.
std::vector<UnderlyingPoint> sample_underlying(const CurationConfig& config,
                                               long n, std::uint64_t seed);

LogProbVector teacher_log_probs(const TeacherModel& teacher,
                                std::span<const double> z);

// s independent label draws from log_p.
std::vector<int> simulate_labelers(const LogProbVector& log_p, int s,
                                   std::uint64_t seed);

// Unanimous labels keep the example; any disagreement rejects it.
CuratedExample curate(const UnderlyingPoint& point, std::span<const int> labels);

// Draw, label, curate, strip labels down to labelled_fraction, and append a
// pool of n_draws fresh raw draws.
CuratedDataset generate_dataset(const CurationConfig& config);

// z plus isotropic Gaussian noise; stddev 0 returns z unchanged.
std::vector<double> augment(std::span<const double> z, double stddev,
                            std::uint64_t seed);

}  // namespace cssl
