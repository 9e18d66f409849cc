// Command-line front end: simulate datasets, train models, verify the bound
// family, evaluate checkpoints. Machine-readable JSON goes to stdout, human
// commentary to stderr. Exit codes: 0 success, 1 property failure, 2 I/O or
// config error.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cssl/io.hpp"
#include "cssl/model.hpp"
#include "cssl/sim.hpp"
#include "cssl/trainer.hpp"
#include "cssl/verify.hpp"

namespace {

using nlohmann::json;

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  const cssl::CurationConfig config =
      cssl::io::curation_config_from_json(cssl::io::load_json_file(config_path));
  const cssl::CuratedDataset dataset = cssl::generate_dataset(config);
  cssl::io::write_dataset(dataset, out_dir);

  long labelled = 0, unlabelled = 0, pool = 0;
  for (const auto& example : dataset.examples) {
    switch (example.kind) {
      case cssl::ExampleKind::labelled: ++labelled; break;
      case cssl::ExampleKind::unlabelled: ++unlabelled; break;
      case cssl::ExampleKind::pool: ++pool; break;
      case cssl::ExampleKind::rejected: break;
    }
  }
  const double consensus_rate =
      static_cast<double>(labelled + unlabelled) /
      static_cast<double>(config.n_draws);
  std::cerr << "wrote " << out_dir << ": " << labelled << " labelled, "
            << unlabelled << " unlabelled, " << dataset.n_rejected
            << " rejected, " << pool << " pool\n";
  std::cout << json{{"counts",
                     {{"labelled", labelled},
                      {"unlabelled", unlabelled},
                      {"rejected", dataset.n_rejected},
                      {"pool", pool}}},
                    {"consensus_rate", consensus_rate},
                    {"out", out_dir}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
  const cssl::TrainConfig config =
      cssl::io::train_config_from_json(cssl::io::load_json_file(config_path));
  const cssl::CuratedDataset dataset = cssl::io::read_dataset(data_dir);
  if (config.objective.s_labelers != dataset.config.s_labelers)
    std::cerr << "note: objective assumes " << config.objective.s_labelers
              << " labelers, dataset was curated with "
              << dataset.config.s_labelers << "\n";

  const auto t0 = std::chrono::steady_clock::now();
  // Per-epoch evaluation runs on the dataset's labelled examples.
  const auto [params, metrics] = cssl::train(dataset, config);
  const double total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  std::filesystem::create_directories(out_dir);
  cssl::io::write_checkpoint({params, config.seed},
                             std::filesystem::path(out_dir) /
                                 "checkpoint.json");
  cssl::io::write_metrics(metrics,
                          std::filesystem::path(out_dir) / "metrics.jsonl");

  const auto& last = metrics.epochs.back();
  std::cerr << "trained " << config.epochs << " epochs; final accuracy "
            << last.test_accuracy << ", final multi-sample ll "
            << last.test_multi_sample_ll << "\n";
  std::cout << json{{"config", cssl::io::train_config_to_json(config)},
                    {"final_accuracy", last.test_accuracy},
                    {"final_multi_sample_ll", last.test_multi_sample_ll},
                    {"total_wall_clock_seconds", total_seconds},
                    {"out", out_dir}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_verify_bounds(long samples, std::uint64_t seed, bool corrupt) {
  const cssl::VerifyReport report =
      cssl::verify_bounds(samples, seed, corrupt);
  json checks = json::array();
  for (const auto& check : report.checks) {
    checks.push_back({{"name", check.name},
                      {"checked", check.checked},
                      {"failures", check.failures},
                      {"worst_slack", check.worst_slack}});
    std::cerr << (check.failures == 0 ? "ok   " : "FAIL ") << check.name
              << ": " << check.checked << " checked, " << check.failures
              << " failures, worst slack " << check.worst_slack << "\n";
  }
  std::cout << json{{"checks", checks},
                    {"all_pass", report.all_pass},
                    {"samples", samples},
                    {"seed", seed}}
                   .dump()
            << "\n";
  if (!report.all_pass) {
    std::cerr << "bound verification failed; reproduce with --samples "
              << samples << " --seed " << seed << "\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             int k, double stddev, std::uint64_t seed) {
  const cssl::io::Checkpoint checkpoint =
      cssl::io::read_checkpoint(checkpoint_path);
  const cssl::CuratedDataset dataset = cssl::io::read_dataset(data_dir);
  if (checkpoint.params.shapes.front() != dataset.config.dim)
    throw std::invalid_argument(
        "eval: checkpoint input dimension " +
        std::to_string(checkpoint.params.shapes.front()) +
        " does not match dataset dim " +
        std::to_string(dataset.config.dim));

  std::vector<cssl::LabelledExample> test;
  for (const auto& example : dataset.examples) {
    if (example.kind == cssl::ExampleKind::labelled)
      test.push_back({*example.x, *example.y});
  }
  if (test.empty())
    throw std::invalid_argument("eval: dataset has no labelled examples");

  const cssl::EvalReport report =
      cssl::evaluate_report(checkpoint.params, test, stddev, k, seed);
  std::cerr << "evaluated " << test.size() << " examples: accuracy "
            << report.accuracy << ", plain ll " << report.plain_ll
            << ", k-sample ll " << report.multi_sample_ll << "\n";
  std::cout << json{{"accuracy", report.accuracy},
                    {"plain_ll", report.plain_ll},
                    {"single_sample_ll", report.single_sample_ll},
                    {"multi_sample_ll", report.multi_sample_ll},
                    {"k", k},
                    {"noise_stddev", stddev}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curated-dataset consensus simulator and semi-supervised trainer"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, checkpoint_path;
  long samples = 10000;
  std::uint64_t seed = 0;
  bool corrupt = false;
  int k = 1;
  double stddev = 0.0;

  auto* simulate = app.add_subcommand("simulate", "generate a curated dataset");
  simulate->add_option("--config", config_path, "curation config JSON")
      ->required();
  simulate->add_option("--out", out_dir, "output dataset directory")
      ->required();

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--config", config_path, "train config JSON")->required();
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output directory")->required();

  auto* verify =
      app.add_subcommand("verify-bounds", "check the bound family numerically");
  verify->add_option("--samples", samples, "random samples per check");
  verify->add_option("--seed", seed, "base seed");
  verify
      ->add_flag("--corrupt-entropy-bound", corrupt,
                 "test hook: shift the entropy bound up by 0.1")
      ->group("");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")
      ->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--k", k, "augmentation draws per example")
      ->check(CLI::PositiveNumber);
  eval->add_option("--stddev", stddev, "augmentation noise stddev");
  eval->add_option("--seed", seed, "augmentation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(config_path, out_dir);
    if (train->parsed()) return cmd_train(config_path, data_dir, out_dir);
    if (verify->parsed()) return cmd_verify_bounds(samples, seed, corrupt);
    if (eval->parsed()) return cmd_eval(checkpoint_path, data_dir, k, stddev, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
