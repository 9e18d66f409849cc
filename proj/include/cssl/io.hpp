#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "cssl/model.hpp"
#include "cssl/sim.hpp"
#include "cssl/trainer.hpp"

// File formats, all version "1":
//   dataset dir:  header.json  {"version","config","n_rejected"}
//                 data.jsonl   one {"kind","x","y"} object per example,
//                              rejected examples appear only as the count
//   checkpoint:   single JSON  {"version","shapes","seed","flat"}
//   metrics:      JSON lines, one record per epoch (no wall-clock fields,
//                 so reruns are byte-identical)
// Config parsing is strict: unknown fields, missing fields, and version
// mismatches all throw.

namespace cssl::io {

nlohmann::json curation_config_to_json(const CurationConfig& config);
CurationConfig curation_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::filesystem::path& path);

void write_dataset(const CuratedDataset& dataset,
                   const std::filesystem::path& dir);
CuratedDataset read_dataset(const std::filesystem::path& dir);

struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
};

void write_checkpoint(const Checkpoint& checkpoint,
                      const std::filesystem::path& file);
Checkpoint read_checkpoint(const std::filesystem::path& file);

void write_metrics(const Metrics& metrics, const std::filesystem::path& file);

}  // namespace cssl::io
