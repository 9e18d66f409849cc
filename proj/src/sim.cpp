#include "cssl/sim.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "cssl/rng.hpp"

namespace cssl {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

void validate(const CurationConfig& config) {
  require(config.s_labelers >= 1, "CurationConfig.s_labelers: must be >= 1");
  require(config.n_classes >= 2, "CurationConfig.n_classes: must be >= 2");
  require(config.dim >= 1, "CurationConfig.dim: must be >= 1");
  require(std::isfinite(config.teacher.temperature) &&
              config.teacher.temperature > 0.0,
          "CurationConfig.teacher.temperature: must be a positive real");
  require(static_cast<int>(config.teacher.class_centers.size()) ==
              config.n_classes,
          "CurationConfig.teacher.class_centers: need one center per class");
  for (const auto& center : config.teacher.class_centers) {
    require(static_cast<int>(center.size()) == config.dim,
            "CurationConfig.teacher.class_centers: center dimension != dim");
    for (double v : center)
      require(std::isfinite(v),
              "CurationConfig.teacher.class_centers: non-finite coordinate");
  }
  require(std::isfinite(config.mixture_stddev) && config.mixture_stddev >= 0.0,
          "CurationConfig.mixture_stddev: must be a non-negative real");
  require(config.labelled_fraction >= 0.0 && config.labelled_fraction <= 1.0,
          "CurationConfig.labelled_fraction: must lie in [0, 1]");
  require(config.n_draws >= 1, "CurationConfig.n_draws: must be >= 1");
}

void validate(const AugmentationSpec& aug) {
  require(std::isfinite(aug.noise_stddev_weak) && aug.noise_stddev_weak >= 0.0,
          "AugmentationSpec.noise_stddev_weak: must be a non-negative real");
  require(
      std::isfinite(aug.noise_stddev_strong) && aug.noise_stddev_strong >= 0.0,
      "AugmentationSpec.noise_stddev_strong: must be a non-negative real");
  require(aug.k_augmentations >= 1,
          "AugmentationSpec.k_augmentations: must be >= 1");
  require(aug.m_tuples >= 1, "AugmentationSpec.m_tuples: must be >= 1");
}

std::vector<UnderlyingPoint> sample_underlying(const CurationConfig& config,
                                               long n, std::uint64_t seed) {
  validate(config);
  require(n >= 1, "sample_underlying: n must be >= 1");
  std::vector<UnderlyingPoint> points;
  points.reserve(n);
  for (long i = 0; i < n; ++i) {
    rng::Stream stream(rng::derive(seed, "underlying", i));
    const int cls = static_cast<int>(stream.below(config.n_classes));
    UnderlyingPoint point;
    point.true_class = cls;
    point.z.resize(config.dim);
    const auto& center = config.teacher.class_centers[cls];
    for (int d = 0; d < config.dim; ++d)
      point.z[d] = center[d] + config.mixture_stddev * stream.normal();
    points.push_back(std::move(point));
  }
  return points;
}

LogProbVector teacher_log_probs(const TeacherModel& teacher,
                                std::span<const double> z) {
  require(!teacher.class_centers.empty(),
          "teacher_log_probs: teacher has no class centers");
  require(teacher.temperature > 0.0 && std::isfinite(teacher.temperature),
          "teacher_log_probs: temperature must be a positive real");
  for (double v : z)
    require(std::isfinite(v), "teacher_log_probs: non-finite input point");
  LogitVector logits;
  logits.values.reserve(teacher.class_centers.size());
  for (const auto& center : teacher.class_centers) {
    require(center.size() == z.size(),
            "teacher_log_probs: point dimension != center dimension");
    double d2 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double diff = z[i] - center[i];
      d2 += diff * diff;
    }
    logits.values.push_back(-d2 / teacher.temperature);
  }
  return log_softmax(logits);
}

std::vector<int> simulate_labelers(const LogProbVector& log_p, int s,
                                   std::uint64_t seed) {
  require(s >= 1, "simulate_labelers: s must be >= 1");
  rng::Stream stream(seed);
  std::vector<int> labels(s);
  for (int i = 0; i < s; ++i)
    labels[i] = stream.categorical_from_log_probs(log_p.values());
  return labels;
}

CuratedExample curate(const UnderlyingPoint& point,
                      std::span<const int> labels) {
  require(!labels.empty(), "curate: need at least one label");
  for (int y : labels) {
    if (y != labels.front())
      return CuratedExample{std::nullopt, std::nullopt, ExampleKind::rejected};
  }
  return CuratedExample{point.z, labels.front(), ExampleKind::labelled};
}

CuratedDataset generate_dataset(const CurationConfig& config) {
  validate(config);
  CuratedDataset dataset;
  dataset.config = config;

  auto points = sample_underlying(config, config.n_draws, config.seed);
  std::vector<std::size_t> consensus_idx;
  for (long i = 0; i < config.n_draws; ++i) {
    const auto log_p = teacher_log_probs(config.teacher, points[i].z);
    const auto labels = simulate_labelers(
        log_p, config.s_labelers, rng::derive(config.seed, "labelers", i));
    auto example = curate(points[i], labels);
    if (example.kind == ExampleKind::labelled)
      consensus_idx.push_back(dataset.examples.size());
    else
      ++dataset.n_rejected;
    dataset.examples.push_back(std::move(example));
  }

  // Keep labels on an exact uniformly chosen share of the consensus
  // examples; the rest become unlabelled in place.
  {
    rng::Stream stream(rng::derive(config.seed, "strip", 0));
    rng::shuffle(consensus_idx, stream);
    const auto keep = static_cast<std::size_t>(std::llround(
        config.labelled_fraction * static_cast<double>(consensus_idx.size())));
    for (std::size_t j = keep; j < consensus_idx.size(); ++j) {
      auto& example = dataset.examples[consensus_idx[j]];
      example.y.reset();
      example.kind = ExampleKind::unlabelled;
    }
  }

  auto pool = sample_underlying(config, config.n_draws,
                                rng::derive(config.seed, "pool", 0));
  for (auto& point : pool) {
    dataset.examples.push_back(CuratedExample{std::move(point.z), std::nullopt,
                                              ExampleKind::pool});
  }
  return dataset;
}

std::vector<double> augment(std::span<const double> z, double stddev,
                            std::uint64_t seed) {
  require(std::isfinite(stddev) && stddev >= 0.0,
          "augment: stddev must be a non-negative real");
  std::vector<double> out(z.begin(), z.end());
  if (stddev == 0.0) return out;
  rng::Stream stream(seed);
  for (double& v : out) v += stddev * stream.normal();
  return out;
}

}  // namespace cssl
