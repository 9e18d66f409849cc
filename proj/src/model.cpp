#include "cssl/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cssl/rng.hpp"

namespace cssl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroLogProb = -700.0;

struct Layer {
  int in = 0;
  int out = 0;
  long w_off = 0;
  long b_off = 0;
};

void check_shapes(std::span<const int> shapes) {
  if (shapes.size() < 2)
    throw std::invalid_argument(
        "model shapes: need at least input and output dimensions");
  for (int s : shapes) {
    if (s < 1) throw std::invalid_argument("model shapes: dimensions must be >= 1");
  }
}

std::vector<Layer> layout(std::span<const int> shapes) {
  check_shapes(shapes);
  std::vector<Layer> layers;
  long offset = 0;
  for (std::size_t l = 0; l + 1 < shapes.size(); ++l) {
    Layer layer{shapes[l], shapes[l + 1], offset,
                offset + static_cast<long>(shapes[l]) * shapes[l + 1]};
    offset = layer.b_off + layer.out;
    layers.push_back(layer);
  }
  return layers;
}

void check_params(const ModelParams& params, const std::vector<Layer>& layers) {
  const long expect = layers.back().b_off + layers.back().out;
  if (static_cast<long>(params.flat.size()) != expect)
    throw std::invalid_argument(
        "model params: flat size " + std::to_string(params.flat.size()) +
        " does not match shapes (expected " + std::to_string(expect) + ")");
}

// Logits for one input row; acts, when given, receives every layer's input
// (acts[0] = x, acts[l >= 1] = tanh outputs feeding layer l).
std::vector<double> forward_row(const ModelParams& params,
                                const std::vector<Layer>& layers,
                                std::span<const double> x,
                                std::vector<std::vector<double>>* acts) {
  if (static_cast<int>(x.size()) != params.shapes.front())
    throw std::invalid_argument("forward: input dimension mismatch (got " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(params.shapes.front()) + ")");
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (acts) acts->push_back(a);
    const Layer& layer = layers[l];
    std::vector<double> z(layer.out);
    const double* W = params.flat.data() + layer.w_off;
    const double* b = params.flat.data() + layer.b_off;
    for (int o = 0; o < layer.out; ++o) {
      double sum = b[o];
      const double* w = W + static_cast<long>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) sum += w[i] * a[i];
      z[o] = sum;
    }
    if (l + 1 < layers.size()) {
      for (double& v : z) v = std::tanh(v);
    }
    a = std::move(z);
  }
  return a;
}

// Accumulates scale * dLoss/dParams into grad, given dLoss/dLogits.
void backward_row(const ModelParams& params, const std::vector<Layer>& layers,
                  const std::vector<std::vector<double>>& acts,
                  std::span<const double> dlogits, double scale,
                  std::span<double> grad) {
  std::vector<double> dz(dlogits.begin(), dlogits.end());
  for (long l = static_cast<long>(layers.size()) - 1; l >= 0; --l) {
    const Layer& layer = layers[l];
    const std::vector<double>& a = acts[l];
    double* gW = grad.data() + layer.w_off;
    double* gb = grad.data() + layer.b_off;
    for (int o = 0; o < layer.out; ++o) {
      const double g = scale * dz[o];
      gb[o] += g;
      double* gw = gW + static_cast<long>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) gw[i] += g * a[i];
    }
    if (l == 0) break;
    const double* W = params.flat.data() + layer.w_off;
    std::vector<double> da(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double* w = W + static_cast<long>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) da[i] += w[i] * dz[o];
    }
    // a is this layer's input, i.e. tanh of the previous preactivation.
    for (int i = 0; i < layer.in; ++i) da[i] *= 1.0 - a[i] * a[i];
    dz = std::move(da);
  }
}

struct TermEval {
  double value = 0.0;
  // dValue/dLogProbs, one vector per row; same shapes as the lp rows.
  std::vector<std::vector<double>> dlp;
};

int require_label(const ObjectiveInput& input, const char* who) {
  if (input.label < 0)
    throw std::invalid_argument(std::string(who) + ": example needs a label");
  return input.label;
}

// Value and d(value)/d(log p) for one prepared example, selections held
// constant (stop-gradient).
TermEval eval_term(const std::vector<LogProbVector>& lp,
                   const ObjectiveInput& input, const ObjectiveSpec& spec) {
  const int s = spec.s_labelers;
  TermEval ev;
  ev.dlp.reserve(lp.size());
  for (const auto& row : lp) ev.dlp.emplace_back(row.size(), 0.0);

  auto single_row = [&](const char* who) -> const LogProbVector& {
    if (lp.size() != 1)
      throw std::invalid_argument(std::string(who) + ": expected one row");
    return lp.front();
  };

  switch (spec.kind) {
    case ObjectiveKind::supervised_consensus: {
      const auto& row = single_row("supervised_consensus");
      const int y = require_label(input, "supervised_consensus");
      ev.value = supervised_consensus_ll(row, y, s);
      ev.dlp[0][y] += s;
      break;
    }
    case ObjectiveKind::unlabelled_exact: {
      const auto& row = single_row("unlabelled_exact");
      ev.value = unlabelled_exact_ll(row, s);
      std::vector<double> scaled(row.size());
      for (std::size_t y = 0; y < row.size(); ++y) scaled[y] = s * row[y];
      const double lse = logsumexp(scaled);
      for (std::size_t y = 0; y < row.size(); ++y)
        ev.dlp[0][y] = s * std::exp(scaled[y] - lse);
      break;
    }
    case ObjectiveKind::entropy_bound: {
      const auto& row = single_row("entropy_bound");
      ev.value = entropy_bound(row, s);
      for (std::size_t y = 0; y < row.size(); ++y) {
        const double l = row[y];
        if (l < kZeroLogProb) continue;  // zero-probability entries are flat
        ev.dlp[0][y] = (s - 1) * std::exp(l) * (l + 1.0);
      }
      break;
    }
    case ObjectiveKind::pseudo_label_bound: {
      const auto& row = single_row("pseudo_label_bound");
      const PseudoLabel pl =
          select_pseudo_label(row, spec.pseudo_label_threshold);
      if (!pl.accepted) break;  // below-threshold examples contribute nothing
      ev.value = pseudo_label_bound(row, pl.label, s);
      ev.dlp[0][pl.label] += s;
      break;
    }
    case ObjectiveKind::aug_single_sample:
    case ObjectiveKind::aug_multi_sample: {
      const int y = require_label(input, "aug_supervised");
      AugmentedLogProbs aug(lp, AugRole::k_augmentations);
      const std::size_t k = lp.size();
      if (spec.kind == ObjectiveKind::aug_single_sample) {
        ev.value = aug_supervised_single_sample(aug, y);
        for (std::size_t j = 0; j < k; ++j)
          ev.dlp[j][y] = 1.0 / static_cast<double>(k);
      } else {
        ev.value = aug_supervised_multi_sample(aug, y);
        std::vector<double> vals(k);
        for (std::size_t j = 0; j < k; ++j) vals[j] = lp[j][y];
        const double lse = logsumexp(vals);
        for (std::size_t j = 0; j < k; ++j)
          ev.dlp[j][y] = std::exp(vals[j] - lse);
      }
      break;
    }
    case ObjectiveKind::mixmatch_jensen:
    case ObjectiveKind::mixmatch_pseudo: {
      if (lp.size() % s != 0 || lp.empty())
        throw std::invalid_argument(
            "mixmatch: rows must hold M tuples of s_labelers rows");
      const std::size_t m = lp.size() / s;
      std::vector<AugmentedLogProbs> tuples;
      tuples.reserve(m);
      for (std::size_t t = 0; t < m; ++t) {
        std::vector<LogProbVector> rows;
        rows.reserve(s);
        for (int j = 0; j < s; ++j) rows.push_back(lp[t * s + j]);
        tuples.emplace_back(std::move(rows), AugRole::s_tuple);
      }
      const std::size_t c = lp.front().size();
      if (spec.kind == ObjectiveKind::mixmatch_jensen) {
        ev.value = mixmatch_jensen_bound(tuples);
        for (std::size_t t = 0; t < m; ++t) {
          std::vector<double> joint(c, 0.0);
          for (int j = 0; j < s; ++j)
            for (std::size_t y = 0; y < c; ++y) joint[y] += lp[t * s + j][y];
          const double lse = logsumexp(joint);
          for (std::size_t y = 0; y < c; ++y) {
            const double w = std::exp(joint[y] - lse) / static_cast<double>(m);
            for (int j = 0; j < s; ++j) ev.dlp[t * s + j][y] += w;
          }
        }
      } else {
        // The first row of each tuple is the weak augmentation; the label
        // comes from the mean weak probability vector and is then frozen.
        std::vector<double> mean_prob(c, 0.0);
        for (std::size_t t = 0; t < m; ++t)
          for (std::size_t y = 0; y < c; ++y)
            mean_prob[y] += std::exp(lp[t * s][y]) / static_cast<double>(m);
        std::vector<double> log_mean(c);
        for (std::size_t y = 0; y < c; ++y)
          log_mean[y] = mean_prob[y] > 0.0 ? std::log(mean_prob[y]) : -kInf;
        const PseudoLabel pl = select_pseudo_label(
            LogProbVector(std::move(log_mean)), spec.pseudo_label_threshold);
        if (!pl.accepted) break;
        ev.value = mixmatch_pseudo_bound(tuples, pl.label);
        std::vector<double> per_tuple(m, 0.0);
        for (std::size_t t = 0; t < m; ++t)
          for (int j = 0; j < s; ++j) per_tuple[t] += lp[t * s + j][pl.label];
        const double lse = logsumexp(per_tuple);
        for (std::size_t t = 0; t < m; ++t) {
          const double w = std::exp(per_tuple[t] - lse);
          for (int j = 0; j < s; ++j) ev.dlp[t * s + j][pl.label] += w;
        }
      }
      break;
    }
    case ObjectiveKind::no_consensus: {
      ev.value = no_consensus_ll(lp, s, input.n_rejected);
      if (input.n_rejected == 0 || ev.value == -kInf) break;
      std::vector<double> per_point;
      per_point.reserve(lp.size());
      for (const auto& row : lp)
        per_point.push_back(log_no_consensus_prob(row, s));
      const double lse = logsumexp(per_point);
      // Per point, softmax weight times the slope of log(1 - e^d) collapses
      // to -s * exp(s * lp - lse); the per-point term cancels, so the
      // expression stays stable even near certain-consensus points.
      for (std::size_t i = 0; i < lp.size(); ++i) {
        for (std::size_t y = 0; y < lp[i].size(); ++y) {
          ev.dlp[i][y] = -static_cast<double>(input.n_rejected) * s *
                         std::exp(s * lp[i][y] - lse);
        }
      }
      break;
    }
  }
  return ev;
}

}  // namespace

long param_count(std::span<const int> shapes) {
  const auto layers = layout(shapes);
  return layers.back().b_off + layers.back().out;
}

ModelParams init_params(std::vector<int> shapes, std::uint64_t seed) {
  const auto layers = layout(shapes);
  ModelParams params;
  params.shapes = std::move(shapes);
  params.flat.assign(layers.back().b_off + layers.back().out, 0.0);
  rng::Stream stream(seed);
  for (const Layer& layer : layers) {
    const double stddev = std::sqrt(2.0 / layer.in);
    for (long i = 0; i < static_cast<long>(layer.in) * layer.out; ++i)
      params.flat[layer.w_off + i] = stddev * stream.normal();
    // biases stay zero
  }
  return params;
}

LogitVector forward(const ModelParams& params, std::span<const double> x) {
  const auto layers = layout(params.shapes);
  check_params(params, layers);
  return LogitVector{forward_row(params, layers, x, nullptr)};
}

std::pair<double, GradVector> loss_and_grad(const ModelParams& params,
                                            std::span<const ObjectiveInput> batch,
                                            const ObjectiveSpec& spec) {
  spec.validate();
  if (batch.empty())
    throw std::invalid_argument("loss_and_grad: batch must be non-empty");
  const auto layers = layout(params.shapes);
  check_params(params, layers);
  const double term_weight = spec.weight(term_of(spec.kind));

  double loss = 0.0;
  GradVector grad;
  grad.flat.assign(params.flat.size(), 0.0);

  for (std::size_t idx = 0; idx < batch.size(); ++idx) {
    const ObjectiveInput& input = batch[idx];
    if (input.rows.empty())
      throw std::invalid_argument("loss_and_grad: example " +
                                  std::to_string(idx) + " has no rows");
    std::vector<std::vector<std::vector<double>>> acts(input.rows.size());
    std::vector<LogProbVector> lp;
    lp.reserve(input.rows.size());
    for (std::size_t r = 0; r < input.rows.size(); ++r) {
      lp.push_back(log_softmax(
          LogitVector{forward_row(params, layers, input.rows[r], &acts[r])}));
    }

    const TermEval ev = eval_term(lp, input, spec);
    if (ev.value == -kInf)
      throw std::runtime_error(
          "loss_and_grad: objective value is -inf at example " +
          std::to_string(idx) + " (kind " + to_string(spec.kind) + ")");
    if (std::isnan(ev.value))
      throw std::runtime_error(
          "loss_and_grad: objective value is NaN at example " +
          std::to_string(idx) + " (kind " + to_string(spec.kind) + ")");

    const double scale = -term_weight * input.weight;
    loss += scale * ev.value;
    if (scale == 0.0) continue;
    for (std::size_t r = 0; r < input.rows.size(); ++r) {
      // Through log_softmax: dz = dlp - softmax(z) * sum(dlp).
      double total = 0.0;
      for (double d : ev.dlp[r]) total += d;
      std::vector<double> dlogits(ev.dlp[r].size());
      for (std::size_t y = 0; y < dlogits.size(); ++y)
        dlogits[y] = ev.dlp[r][y] - std::exp(lp[r][y]) * total;
      backward_row(params, layers, acts[r], dlogits, scale, grad.flat);
    }
  }
  return {loss, grad};
}

GradVector finite_diff_grad(const ModelParams& params,
                            std::span<const ObjectiveInput> batch,
                            const ObjectiveSpec& spec, double step) {
  if (!(step > 0.0))
    throw std::invalid_argument("finite_diff_grad: step must be positive");
  GradVector grad;
  grad.flat.assign(params.flat.size(), 0.0);
  ModelParams probe = params;
  for (std::size_t i = 0; i < params.flat.size(); ++i) {
    probe.flat[i] = params.flat[i] + step;
    const double up = loss_and_grad(probe, batch, spec).first;
    probe.flat[i] = params.flat[i] - step;
    const double down = loss_and_grad(probe, batch, spec).first;
    probe.flat[i] = params.flat[i];
    grad.flat[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace cssl
