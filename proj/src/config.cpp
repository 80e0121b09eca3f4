#include "svt/config.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "svt/error.hpp"
#include "svt/fsutil.hpp"
#include "svt/rng.hpp"

namespace svt {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

const std::vector<std::string> kKnownKeys = {
    "seed",
    "out_dir",
    "encoder_name",
    "ablation",
    "prompt_template",
    "dataset.kind",
    "dataset.path",
    "dataset.classes",
    "dataset.train_per_class",
    "dataset.test_per_class",
    "dataset.feature_dim",
    "dataset.cluster_spread",
    "dataset.seed",
    "protocol.base_classes",
    "protocol.sessions",
    "protocol.ways",
    "protocol.shots",
    "model.d_v",
    "vision.image_size",
    "vision.channels",
    "vision.patch_size",
    "vision.embed_dim",
    "vision.depth",
    "vision.heads",
    "vision.window_size",
    "vision.shift_windows",
    "vision.mlp_hidden",
    "vision.head_hidden",
    "text.vocab_size",
    "text.max_len",
    "text.token_dim",
    "text.depth",
    "text.heads",
    "text.d_s",
    "text.projection_hidden",
    "text.mlp_hidden",
    "text.freeze_encoder",
    "train.lambda",
    "train.lr_b",
    "train.momentum",
    "train.epochs",
    "train.finetune_epochs",
    "train.finetune_lr",
    "train.decay_factor",
    "train.decay_every",
    "train.batch_size",
    "train.separate_heads",
    "train.augment_flip",
    "train.augment_crop",
    "head.kind",
    "head.scoring",
    "export.classes",
    "export.pca2",
};

std::string format_double_kv(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& known_config_keys() { return kKnownKeys; }

Config Config::parse_string(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, "config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      fail(ErrorKind::Config,
           "config line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second)
      fail(ErrorKind::Config, "duplicate config key: " + key);
  }
  return Config(std::move(kv));
}

Config Config::parse_file(const std::filesystem::path& path) {
  return parse_string(read_file(path));
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Config,
         "config key " + key + ": not an integer: '" + it->second + "'");
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Config,
         "config key " + key + ": not a number: '" + it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::Config,
       "config key " + key + ": not a boolean: '" + v + "'");
}

std::uint64_t Config::get_u64(const std::string& key,
                              std::uint64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Config,
         "config key " + key + ": not an unsigned integer: '" + it->second +
             "'");
  }
}

ExperimentConfig experiment_from_config(const Config& config) {
  for (const auto& [key, value] : config.entries())
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) ==
        kKnownKeys.end())
      fail(ErrorKind::Config, "unknown config key: " + key);

  ExperimentConfig cfg;
  cfg.seed = config.get_u64("seed", cfg.seed);
  cfg.out_dir = config.get_string("out_dir", cfg.out_dir);
  cfg.encoder_name = config.get_string("encoder_name", cfg.encoder_name);
  cfg.ablation = config.get_bool("ablation", cfg.ablation);
  cfg.prompt_template =
      config.get_string("prompt_template", cfg.prompt_template);

  const std::string kind = config.get_string("dataset.kind", "synthetic");
  if (kind == "synthetic") {
    cfg.dataset_kind = DatasetKind::Synthetic;
  } else if (kind == "csv") {
    cfg.dataset_kind = DatasetKind::Csv;
  } else if (kind == "dir") {
    cfg.dataset_kind = DatasetKind::Dir;
  } else {
    fail(ErrorKind::Config, "dataset.kind must be synthetic|csv|dir");
  }
  cfg.dataset_path = config.get_string("dataset.path", "");
  if (cfg.dataset_kind != DatasetKind::Synthetic && cfg.dataset_path.empty())
    fail(ErrorKind::Config, "dataset.path required for csv/dir datasets");
  cfg.synthetic.classes = config.get_int("dataset.classes", 20);
  cfg.synthetic.train_per_class =
      config.get_int("dataset.train_per_class", 30);
  cfg.synthetic.test_per_class = config.get_int("dataset.test_per_class", 10);
  cfg.synthetic.feature_dim = config.get_int("dataset.feature_dim", 32);
  cfg.synthetic.cluster_spread =
      config.get_double("dataset.cluster_spread", 0.1);
  cfg.synthetic.seed = config.get_u64("dataset.seed", cfg.seed);

  cfg.protocol.base_class_count = config.get_int("protocol.base_classes", 12);
  cfg.protocol.session_count = config.get_int("protocol.sessions", 4);
  cfg.protocol.ways = config.get_int("protocol.ways", 2);
  cfg.protocol.shots = config.get_int("protocol.shots", 5);
  cfg.protocol.seed = cfg.seed;

  const int d_v = config.get_int("model.d_v", 8);
  cfg.vision.image_size = config.get_int("vision.image_size", 32);
  cfg.vision.channels = config.get_int("vision.channels", 1);
  cfg.vision.patch_size = config.get_int("vision.patch_size", 4);
  cfg.vision.embed_dim = config.get_int("vision.embed_dim", 16);
  cfg.vision.depth = config.get_int("vision.depth", 2);
  cfg.vision.heads = config.get_int("vision.heads", 2);
  cfg.vision.window_size = config.get_int("vision.window_size", 0);
  cfg.vision.shift_windows = config.get_bool("vision.shift_windows", true);
  cfg.vision.mlp_hidden = config.get_int("vision.mlp_hidden", 32);
  cfg.vision.head_hidden = config.get_int("vision.head_hidden", 16);
  cfg.vision.d_v = d_v;

  cfg.text.vocab_size = config.get_int("text.vocab_size", 256);
  cfg.text.max_len = config.get_int("text.max_len", 8);
  cfg.text.token_dim = config.get_int("text.token_dim", 16);
  cfg.text.depth = config.get_int("text.depth", 1);
  cfg.text.heads = config.get_int("text.heads", 2);
  cfg.text.d_s = config.get_int("text.d_s", 8);
  cfg.text.projection_hidden = config.get_int("text.projection_hidden", 0);
  cfg.text.mlp_hidden = config.get_int("text.mlp_hidden", 0);
  cfg.text.freeze_encoder = config.get_bool("text.freeze_encoder", false);
  cfg.text.d_v = d_v;

  cfg.train.lambda = config.get_double("train.lambda", 1.0);
  cfg.train.lr_b = config.get_double("train.lr_b", 0.01);
  cfg.train.momentum = config.get_double("train.momentum", 0.9);
  cfg.train.main_epochs = config.get_int("train.epochs", 50);
  cfg.train.finetune_epochs = config.get_int("train.finetune_epochs", 0);
  cfg.train.finetune_lr = config.get_double("train.finetune_lr", 0.0002);
  cfg.train.decay_factor = config.get_double("train.decay_factor", 0.5);
  cfg.train.decay_every = config.get_int("train.decay_every", 100);
  cfg.train.batch_size = config.get_int("train.batch_size", 32);
  cfg.train.separate_heads = config.get_bool("train.separate_heads", false);
  cfg.train.augment_flip = config.get_bool("train.augment_flip", false);
  cfg.train.augment_crop = config.get_bool("train.augment_crop", false);
  cfg.train.seed = cfg.seed;

  cfg.head_kind = config.get_string("head.kind", "ncm");
  const std::string scoring = config.get_string("head.scoring", "cosine");
  if (scoring == "cosine") {
    cfg.scoring = Scoring::Cosine;
  } else if (scoring == "dot") {
    cfg.scoring = Scoring::Dot;
  } else {
    fail(ErrorKind::Config, "head.scoring must be cosine|dot");
  }

  const std::string classes = config.get_string("export.classes", "");
  std::string cur;
  for (char c : classes + ",") {
    if (c == ',') {
      const std::string word = trim(cur);
      if (!word.empty()) cfg.export_classes.push_back(word);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cfg.export_pca2 = config.get_bool("export.pca2", true);

  validate_train_config(cfg.train);
  validate_text_config(cfg.text);
  if (cfg.text.d_v != cfg.vision.d_v)
    fail(ErrorKind::Config, "model.d_v must be shared by both encoders");
  return cfg;
}

std::map<std::string, std::string> to_key_values(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(cfg.seed);
  kv["out_dir"] = cfg.out_dir;
  kv["encoder_name"] = cfg.encoder_name;
  kv["ablation"] = cfg.ablation ? "on" : "off";
  kv["prompt_template"] = cfg.prompt_template;
  kv["dataset.kind"] = cfg.dataset_kind == DatasetKind::Synthetic ? "synthetic"
                       : cfg.dataset_kind == DatasetKind::Csv    ? "csv"
                                                                 : "dir";
  kv["dataset.path"] = cfg.dataset_path;
  kv["dataset.classes"] = std::to_string(cfg.synthetic.classes);
  kv["dataset.train_per_class"] =
      std::to_string(cfg.synthetic.train_per_class);
  kv["dataset.test_per_class"] = std::to_string(cfg.synthetic.test_per_class);
  kv["dataset.feature_dim"] = std::to_string(cfg.synthetic.feature_dim);
  kv["dataset.cluster_spread"] =
      format_double_kv(cfg.synthetic.cluster_spread);
  kv["dataset.seed"] = std::to_string(cfg.synthetic.seed);
  kv["protocol.base_classes"] = std::to_string(cfg.protocol.base_class_count);
  kv["protocol.sessions"] = std::to_string(cfg.protocol.session_count);
  kv["protocol.ways"] = std::to_string(cfg.protocol.ways);
  kv["protocol.shots"] = std::to_string(cfg.protocol.shots);
  kv["model.d_v"] = std::to_string(cfg.vision.d_v);
  kv["vision.image_size"] = std::to_string(cfg.vision.image_size);
  kv["vision.channels"] = std::to_string(cfg.vision.channels);
  kv["vision.patch_size"] = std::to_string(cfg.vision.patch_size);
  kv["vision.embed_dim"] = std::to_string(cfg.vision.embed_dim);
  kv["vision.depth"] = std::to_string(cfg.vision.depth);
  kv["vision.heads"] = std::to_string(cfg.vision.heads);
  kv["vision.window_size"] = std::to_string(cfg.vision.window_size);
  kv["vision.shift_windows"] = cfg.vision.shift_windows ? "on" : "off";
  kv["vision.mlp_hidden"] = std::to_string(cfg.vision.mlp_hidden);
  kv["vision.head_hidden"] = std::to_string(cfg.vision.head_hidden);
  kv["text.vocab_size"] = std::to_string(cfg.text.vocab_size);
  kv["text.max_len"] = std::to_string(cfg.text.max_len);
  kv["text.token_dim"] = std::to_string(cfg.text.token_dim);
  kv["text.depth"] = std::to_string(cfg.text.depth);
  kv["text.heads"] = std::to_string(cfg.text.heads);
  kv["text.d_s"] = std::to_string(cfg.text.d_s);
  kv["text.projection_hidden"] = std::to_string(cfg.text.projection_hidden);
  kv["text.mlp_hidden"] = std::to_string(cfg.text.mlp_hidden);
  kv["text.freeze_encoder"] = cfg.text.freeze_encoder ? "on" : "off";
  kv["train.lambda"] = format_double_kv(cfg.train.lambda);
  kv["train.lr_b"] = format_double_kv(cfg.train.lr_b);
  kv["train.momentum"] = format_double_kv(cfg.train.momentum);
  kv["train.epochs"] = std::to_string(cfg.train.main_epochs);
  kv["train.finetune_epochs"] = std::to_string(cfg.train.finetune_epochs);
  kv["train.finetune_lr"] = format_double_kv(cfg.train.finetune_lr);
  kv["train.decay_factor"] = format_double_kv(cfg.train.decay_factor);
  kv["train.decay_every"] = std::to_string(cfg.train.decay_every);
  kv["train.batch_size"] = std::to_string(cfg.train.batch_size);
  kv["train.separate_heads"] = cfg.train.separate_heads ? "on" : "off";
  kv["train.augment_flip"] = cfg.train.augment_flip ? "on" : "off";
  kv["train.augment_crop"] = cfg.train.augment_crop ? "on" : "off";
  kv["head.kind"] = cfg.head_kind;
  kv["head.scoring"] = cfg.scoring == Scoring::Cosine ? "cosine" : "dot";
  std::string joined;
  for (const std::string& w : cfg.export_classes) {
    if (!joined.empty()) joined += ",";
    joined += w;
  }
  kv["export.classes"] = joined;
  kv["export.pca2"] = cfg.export_pca2 ? "on" : "off";
  return kv;
}

std::string canonical_config_string(const ExperimentConfig& cfg) {
  std::ostringstream out;
  for (const auto& [key, value] : to_key_values(cfg))
    out << key << "=" << value << "\n";
  return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  // the output directory must not change the experiment identity
  auto kv = to_key_values(cfg);
  kv.erase("out_dir");
  std::string canon;
  for (const auto& [key, value] : kv) canon += key + "=" + value + "\n";
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

}  // namespace svt
