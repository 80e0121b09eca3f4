#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "svt/prototypes.hpp"
#include "svt/protocol.hpp"
#include "svt/text.hpp"
#include "svt/trainer.hpp"
#include "svt/vision.hpp"

namespace svt {

// Flat key=value text; '#' lines are comments. Unknown keys are rejected so
// a misspelled hyperparameter cannot silently fall back to a default.
class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> kv)
      : kv_(std::move(kv)) {}

  static Config parse_string(const std::string& text);
  static Config parse_file(const std::filesystem::path& path);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

enum class DatasetKind { Synthetic, Csv, Dir };

struct SyntheticSpec {
  int classes = 20;
  int train_per_class = 30;
  int test_per_class = 10;
  int feature_dim = 32;
  double cluster_spread = 0.1;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  DatasetKind dataset_kind = DatasetKind::Synthetic;
  std::string dataset_path;
  SyntheticSpec synthetic;
  ProtocolConfig protocol;
  VisionConfig vision;
  TextConfig text;
  TrainConfig train;
  std::string prompt_template = kDefaultPromptTemplate;
  std::string head_kind = "ncm";
  Scoring scoring = Scoring::Cosine;
  std::string out_dir = "runs";
  std::string encoder_name = "WinT";
  bool ablation = false;
  std::vector<std::string> export_classes;  // empty = all seen classes
  bool export_pca2 = true;

  std::string run_label() const {
    return (train.lambda > 0.0 ? "SV-" : "V-") + encoder_name;
  }
};

// Validates keys against the documented registry and every value range.
ExperimentConfig experiment_from_config(const Config& config);

// Resolved configuration as the full documented key set; basis for the
// config hash and the checkpoint config echo.
std::map<std::string, std::string> to_key_values(const ExperimentConfig& cfg);
std::string canonical_config_string(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);  // 16 hex chars

const std::vector<std::string>& known_config_keys();

}  // namespace svt
