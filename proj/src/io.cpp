#include "cssl/io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

namespace cssl::io {
namespace {

using nlohmann::json;

// Strict object check: every listed key present, nothing else.
void check_keys(const json& j, const char* what,
                std::initializer_list<const char*> keys) {
  if (!j.is_object())
    throw std::invalid_argument(std::string(what) +
                                ": expected a JSON object");
  for (const char* key : keys) {
    if (!j.contains(key))
      throw std::invalid_argument(std::string(what) + ": missing field '" +
                                  key + "'");
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known)
      throw std::invalid_argument(std::string(what) + ": unknown field '" +
                                  key + "'");
  }
}

void check_version(const json& j, const char* what) {
  if (j.at("version").get<std::string>() != "1")
    throw std::invalid_argument(std::string(what) +
                                ": unsupported format version '" +
                                j.at("version").get<std::string>() + "'");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  return in;
}

const char* kind_name(ExampleKind kind) {
  switch (kind) {
    case ExampleKind::labelled: return "labelled";
    case ExampleKind::unlabelled: return "unlabelled";
    case ExampleKind::pool: return "pool";
    case ExampleKind::rejected: return "rejected";
  }
  return "unknown";
}

}  // namespace

json curation_config_to_json(const CurationConfig& config) {
  return json{{"version", "1"},
              {"s_labelers", config.s_labelers},
              {"n_classes", config.n_classes},
              {"dim", config.dim},
              {"teacher",
               {{"class_centers", config.teacher.class_centers},
                {"temperature", config.teacher.temperature}}},
              {"mixture_stddev", config.mixture_stddev},
              {"labelled_fraction", config.labelled_fraction},
              {"n_draws", config.n_draws},
              {"seed", config.seed}};
}

CurationConfig curation_config_from_json(const json& j) {
  check_keys(j, "curation config",
             {"version", "s_labelers", "n_classes", "dim", "teacher",
              "mixture_stddev", "labelled_fraction", "n_draws", "seed"});
  check_version(j, "curation config");
  check_keys(j.at("teacher"), "curation config teacher",
             {"class_centers", "temperature"});
  CurationConfig config;
  config.s_labelers = j.at("s_labelers").get<int>();
  config.n_classes = j.at("n_classes").get<int>();
  config.dim = j.at("dim").get<int>();
  config.teacher.class_centers =
      j.at("teacher").at("class_centers").get<std::vector<std::vector<double>>>();
  config.teacher.temperature = j.at("teacher").at("temperature").get<double>();
  config.mixture_stddev = j.at("mixture_stddev").get<double>();
  config.labelled_fraction = j.at("labelled_fraction").get<double>();
  config.n_draws = j.at("n_draws").get<long>();
  config.seed = j.at("seed").get<std::uint64_t>();
  validate(config);
  return config;
}

json train_config_to_json(const TrainConfig& config) {
  return json{
      {"version", "1"},
      {"objective",
       {{"kind", to_string(config.objective.kind)},
        {"supervised_kind", to_string(config.objective.supervised_kind)},
        {"s_labelers", config.objective.s_labelers},
        {"pseudo_label_threshold", config.objective.pseudo_label_threshold},
        {"weights", config.objective.weights}}},
      {"aug",
       {{"noise_stddev_weak", config.aug.noise_stddev_weak},
        {"noise_stddev_strong", config.aug.noise_stddev_strong},
        {"k_augmentations", config.aug.k_augmentations},
        {"m_tuples", config.aug.m_tuples}}},
      {"epochs", config.epochs},
      {"batch_size_labelled", config.batch_size_labelled},
      {"batch_size_unlabelled", config.batch_size_unlabelled},
      {"learning_rate", config.learning_rate},
      {"optimizer",
       config.optimizer == OptimizerKind::sgd ? "sgd" : "adam"},
      {"adam_betas",
       std::vector<double>{config.adam_betas.first, config.adam_betas.second}},
      {"hidden", config.hidden},
      {"seed", config.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  check_keys(j, "train config",
             {"version", "objective", "aug", "epochs", "batch_size_labelled",
              "batch_size_unlabelled", "learning_rate", "optimizer",
              "adam_betas", "hidden", "seed"});
  check_version(j, "train config");
  const json& obj = j.at("objective");
  check_keys(obj, "train config objective",
             {"kind", "supervised_kind", "s_labelers",
              "pseudo_label_threshold", "weights"});
  const json& aug = j.at("aug");
  check_keys(aug, "train config aug",
             {"noise_stddev_weak", "noise_stddev_strong", "k_augmentations",
              "m_tuples"});

  TrainConfig config;
  auto parse_kind = [](const json& v, const char* what) {
    const auto kind = objective_kind_from_string(v.get<std::string>());
    if (!kind)
      throw std::invalid_argument(std::string(what) +
                                  ": unknown objective kind '" +
                                  v.get<std::string>() + "'");
    return *kind;
  };
  config.objective.kind = parse_kind(obj.at("kind"), "train config objective");
  config.objective.supervised_kind =
      parse_kind(obj.at("supervised_kind"), "train config objective");
  config.objective.s_labelers = obj.at("s_labelers").get<int>();
  config.objective.pseudo_label_threshold =
      obj.at("pseudo_label_threshold").get<double>();
  config.objective.weights =
      obj.at("weights").get<std::map<std::string, double>>();
  config.aug.noise_stddev_weak = aug.at("noise_stddev_weak").get<double>();
  config.aug.noise_stddev_strong = aug.at("noise_stddev_strong").get<double>();
  config.aug.k_augmentations = aug.at("k_augmentations").get<int>();
  config.aug.m_tuples = aug.at("m_tuples").get<int>();
  config.epochs = j.at("epochs").get<int>();
  config.batch_size_labelled = j.at("batch_size_labelled").get<int>();
  config.batch_size_unlabelled = j.at("batch_size_unlabelled").get<int>();
  config.learning_rate = j.at("learning_rate").get<double>();
  const std::string opt = j.at("optimizer").get<std::string>();
  if (opt == "sgd")
    config.optimizer = OptimizerKind::sgd;
  else if (opt == "adam")
    config.optimizer = OptimizerKind::adam;
  else
    throw std::invalid_argument("train config: unknown optimizer '" + opt +
                                "'");
  const auto betas = j.at("adam_betas").get<std::vector<double>>();
  if (betas.size() != 2)
    throw std::invalid_argument(
        "train config: adam_betas must hold exactly two values");
  config.adam_betas = {betas[0], betas[1]};
  config.hidden = j.at("hidden").get<std::vector<int>>();
  config.seed = j.at("seed").get<std::uint64_t>();
  validate(config);
  return config;
}

json load_json_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("invalid JSON in " + path.string() + ": " +
                                e.what());
  }
}

void write_dataset(const CuratedDataset& dataset,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "header.json");
    const json header{{"version", "1"},
                      {"config", curation_config_to_json(dataset.config)},
                      {"n_rejected", dataset.n_rejected}};
    out << header.dump() << "\n";
  }
  auto out = open_out(dir / "data.jsonl");
  for (const auto& example : dataset.examples) {
    if (example.kind == ExampleKind::rejected) continue;
    json row{{"kind", kind_name(example.kind)},
             {"x", *example.x},
             {"y", example.y ? json(*example.y) : json(nullptr)}};
    out << row.dump() << "\n";
  }
}

CuratedDataset read_dataset(const std::filesystem::path& dir) {
  const json header = load_json_file(dir / "header.json");
  check_keys(header, "dataset header", {"version", "config", "n_rejected"});
  check_version(header, "dataset header");
  CuratedDataset dataset;
  dataset.config = curation_config_from_json(header.at("config"));
  dataset.n_rejected = header.at("n_rejected").get<long>();
  if (dataset.n_rejected < 0)
    throw std::invalid_argument("dataset header: n_rejected must be >= 0");

  auto in = open_in(dir / "data.jsonl");
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("dataset data.jsonl line " +
                                  std::to_string(line_no) + ": " + e.what());
    }
    check_keys(row, "dataset example", {"kind", "x", "y"});
    CuratedExample example;
    const std::string kind = row.at("kind").get<std::string>();
    if (kind == "labelled")
      example.kind = ExampleKind::labelled;
    else if (kind == "unlabelled")
      example.kind = ExampleKind::unlabelled;
    else if (kind == "pool")
      example.kind = ExampleKind::pool;
    else
      throw std::invalid_argument("dataset example line " +
                                  std::to_string(line_no) +
                                  ": unknown kind '" + kind + "'");
    example.x = row.at("x").get<std::vector<double>>();
    if (static_cast<int>(example.x->size()) != dataset.config.dim)
      throw std::invalid_argument("dataset example line " +
                                  std::to_string(line_no) +
                                  ": x dimension != config dim");
    if (example.kind == ExampleKind::labelled) {
      if (row.at("y").is_null())
        throw std::invalid_argument("dataset example line " +
                                    std::to_string(line_no) +
                                    ": labelled example needs y");
      example.y = row.at("y").get<int>();
      if (*example.y < 0 || *example.y >= dataset.config.n_classes)
        throw std::invalid_argument("dataset example line " +
                                    std::to_string(line_no) +
                                    ": y out of range");
    } else if (!row.at("y").is_null()) {
      throw std::invalid_argument("dataset example line " +
                                  std::to_string(line_no) +
                                  ": y must be null for kind " + kind);
    }
    dataset.examples.push_back(std::move(example));
  }
  return dataset;
}

void write_checkpoint(const Checkpoint& checkpoint,
                      const std::filesystem::path& file) {
  if (file.has_parent_path())
    std::filesystem::create_directories(file.parent_path());
  auto out = open_out(file);
  const json j{{"version", "1"},
               {"shapes", checkpoint.params.shapes},
               {"seed", checkpoint.seed},
               {"flat", checkpoint.params.flat}};
  out << j.dump() << "\n";
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
  const json j = load_json_file(file);
  check_keys(j, "checkpoint", {"version", "shapes", "seed", "flat"});
  check_version(j, "checkpoint");
  Checkpoint checkpoint;
  checkpoint.params.shapes = j.at("shapes").get<std::vector<int>>();
  checkpoint.params.flat = j.at("flat").get<std::vector<double>>();
  checkpoint.seed = j.at("seed").get<std::uint64_t>();
  if (static_cast<long>(checkpoint.params.flat.size()) !=
      param_count(checkpoint.params.shapes))
    throw std::invalid_argument(
        "checkpoint: flat parameter count does not match shapes");
  return checkpoint;
}

void write_metrics(const Metrics& metrics, const std::filesystem::path& file) {
  if (file.has_parent_path())
    std::filesystem::create_directories(file.parent_path());
  auto out = open_out(file);
  for (const auto& record : metrics.epochs) {
    const json j{{"epoch", record.epoch},
                 {"train_loss", record.train_loss},
                 {"terms", record.term_values},
                 {"test_accuracy", record.test_accuracy},
                 {"test_multi_sample_ll", record.test_multi_sample_ll}};
    out << j.dump() << "\n";
  }
}

}  // namespace cssl::io
