#include "svt/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "svt/error.hpp"
#include "svt/rng.hpp"

namespace svt {

namespace {

// CIFAR100 fine-label vocabulary, alphabetical, underscores spelled out.
constexpr const char* kWords[] = {
    "apple", "aquarium fish", "baby", "bear", "beaver", "bed", "bee",
    "beetle", "bicycle", "bottle", "bowl", "boy", "bridge", "bus",
    "butterfly", "camel", "can", "castle", "caterpillar", "cattle", "chair",
    "chimpanzee", "clock", "cloud", "cockroach", "couch", "crab",
    "crocodile", "cup", "dinosaur", "dolphin", "elephant", "flatfish",
    "forest", "fox", "girl", "hamster", "house", "kangaroo", "keyboard",
    "lamp", "lawn mower", "leopard", "lion", "lizard", "lobster", "man",
    "maple tree", "motorcycle", "mountain", "mouse", "mushroom", "oak tree",
    "orange", "orchid", "otter", "palm tree", "pear", "pickup truck",
    "pine tree", "plain", "plate", "poppy", "porcupine", "possum", "rabbit",
    "raccoon", "ray", "road", "rocket", "rose", "sea", "seal", "shark",
    "shrew", "skunk", "skyscraper", "snail", "snake", "spider", "squirrel",
    "streetcar", "sunflower", "sweet pepper", "table", "tank", "telephone",
    "television", "tiger", "tractor", "train", "trout", "tulip", "turtle",
    "wardrobe", "whale", "willow tree", "wolf", "woman", "worm",
};

constexpr const char* kCsvHeader =
    "example_id,path_or_vector,class_id,class_word,partition";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_vector_field(const std::string& field, std::vector<double>& out) {
  // A payload is a vector iff every ';'-separated piece parses fully as a
  // decimal number. Anything else is treated as a file path.
  out.clear();
  std::size_t start = 0;
  while (start <= field.size()) {
    const std::size_t semi = field.find(';', start);
    const std::string piece =
        field.substr(start, semi == std::string::npos ? std::string::npos
                                                      : semi - start);
    if (piece.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(piece.c_str(), &end);
    if (end != piece.c_str() + piece.size()) return false;
    out.push_back(v);
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return !out.empty();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::span<const char* const> synthetic_word_list() { return kWords; }

std::size_t DatasetManifest::feature_dim() const {
  for (const Example& e : examples)
    if (e.has_vector()) return e.features.size();
  return 0;
}

const std::string& DatasetManifest::word_of(int class_id) const {
  for (const Example& e : examples)
    if (e.class_id == class_id) return e.class_word;
  fail(ErrorKind::Validation,
       "no examples for class " + std::to_string(class_id));
}

std::vector<const Example*> DatasetManifest::of_class(int class_id,
                                                      Partition p) const {
  std::vector<const Example*> out;
  for (const Example& e : examples)
    if (e.class_id == class_id && e.partition == p) out.push_back(&e);
  return out;
}

void validate_manifest(const DatasetManifest& m) {
  if (m.examples.empty())
    fail(ErrorKind::Validation, "manifest has no examples");
  if (m.class_count <= 0)
    fail(ErrorKind::Validation, "manifest class_count must be positive");
  std::set<std::string> ids;
  std::map<int, std::string> words;
  std::vector<int> train_counts(static_cast<std::size_t>(m.class_count), 0);
  std::vector<int> test_counts(static_cast<std::size_t>(m.class_count), 0);
  std::size_t vec_dim = 0;
  for (const Example& e : m.examples) {
    if (!ids.insert(e.example_id).second)
      fail(ErrorKind::Validation, "duplicate example_id: " + e.example_id);
    if (e.class_id < 0 || e.class_id >= m.class_count)
      fail(ErrorKind::Validation,
           "class_id out of range for example " + e.example_id);
    if (e.class_word.empty())
      fail(ErrorKind::Validation,
           "empty class_word for example " + e.example_id);
    auto [it, inserted] = words.emplace(e.class_id, e.class_word);
    if (!inserted && it->second != e.class_word)
      fail(ErrorKind::Validation,
           "class " + std::to_string(e.class_id) +
               " maps to multiple class_words");
    if (e.has_vector()) {
      if (vec_dim == 0) vec_dim = e.features.size();
      if (e.features.empty() || e.features.size() != vec_dim)
        fail(ErrorKind::Validation,
             "inconsistent feature vector length at " + e.example_id);
    }
    auto& counts = e.partition == Partition::Train ? train_counts
                                                   : test_counts;
    counts[static_cast<std::size_t>(e.class_id)]++;
  }
  for (int c = 0; c < m.class_count; ++c) {
    if (train_counts[static_cast<std::size_t>(c)] == 0)
      fail(ErrorKind::Validation,
           "class " + std::to_string(c) + " has no train examples");
    if (test_counts[static_cast<std::size_t>(c)] == 0)
      fail(ErrorKind::Validation,
           "class " + std::to_string(c) + " has no test examples");
  }
}

namespace {

DatasetManifest load_manifest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Input, "cannot open manifest: " + path.string());
  std::string header;
  std::getline(in, header);
  while (!header.empty() && (header.back() == '\r' || header.back() == '\n'))
    header.pop_back();
  if (header != kCsvHeader)
    fail(ErrorKind::Validation,
         "manifest header mismatch; expected '" + std::string(kCsvHeader) +
             "'");
  DatasetManifest m;
  const auto base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 1;
  int max_class = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 5)
      fail(ErrorKind::Validation, "manifest line " + std::to_string(line_no) +
                                      ": expected 5 fields");
    Example e;
    e.example_id = fields[0];
    if (!parse_vector_field(fields[1], e.features)) {
      e.features.clear();
      e.image_path = (base_dir / fields[1]).string();
    }
    try {
      e.class_id = std::stoi(fields[2]);
    } catch (const std::exception&) {
      fail(ErrorKind::Validation, "manifest line " + std::to_string(line_no) +
                                      ": bad class_id '" + fields[2] + "'");
    }
    e.class_word = fields[3];
    if (fields[4] == "train") {
      e.partition = Partition::Train;
    } else if (fields[4] == "test") {
      e.partition = Partition::Test;
    } else {
      fail(ErrorKind::Validation, "manifest line " + std::to_string(line_no) +
                                      ": partition must be train|test");
    }
    max_class = std::max(max_class, e.class_id);
    m.examples.push_back(std::move(e));
  }
  m.class_count = max_class + 1;
  validate_manifest(m);
  return m;
}

DatasetManifest load_manifest_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  DatasetManifest m;
  std::set<std::string> class_words;
  for (const char* part : {"train", "test"}) {
    const fs::path pdir = root / part;
    if (!fs::is_directory(pdir))
      fail(ErrorKind::Input, "dataset root missing partition directory: " +
                                 pdir.string());
    for (const auto& entry : fs::directory_iterator(pdir))
      if (entry.is_directory())
        class_words.insert(entry.path().filename().string());
  }
  std::map<std::string, int> class_ids;
  for (const std::string& w : class_words)
    class_ids.emplace(w, static_cast<int>(class_ids.size()));
  m.class_count = static_cast<int>(class_ids.size());
  for (const char* part : {"train", "test"}) {
    for (const auto& [word, cid] : class_ids) {
      const fs::path cdir = root / part / word;
      if (!fs::is_directory(cdir)) continue;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(cdir))
        if (entry.is_regular_file()) files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      for (const fs::path& f : files) {
        Example e;
        e.example_id =
            std::string(part) + "/" + word + "/" + f.filename().string();
        e.image_path = f.string();
        e.class_id = cid;
        e.class_word = word;
        e.partition =
            std::string(part) == "train" ? Partition::Train : Partition::Test;
        m.examples.push_back(std::move(e));
      }
    }
  }
  validate_manifest(m);
  return m;
}

}  // namespace

DatasetManifest load_dataset_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorKind::Input, "manifest path does not exist: " + path.string());
  return std::filesystem::is_directory(path) ? load_manifest_dir(path)
                                             : load_manifest_csv(path);
}

std::string manifest_to_csv(const DatasetManifest& m) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const Example& e : m.examples) {
    out << e.example_id << ",";
    if (e.has_vector()) {
      for (std::size_t i = 0; i < e.features.size(); ++i) {
        if (i) out << ";";
        out << format_double(e.features[i]);
      }
    } else {
      out << e.image_path;
    }
    out << "," << e.class_id << "," << e.class_word << ","
        << (e.partition == Partition::Train ? "train" : "test") << "\n";
  }
  return out.str();
}

void save_manifest_csv(const DatasetManifest& m,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Input, "cannot write manifest: " + path.string());
  out << manifest_to_csv(m);
}

DatasetManifest synthesize_dataset(int class_count, int per_class_train,
                                   int per_class_test, int feature_dim,
                                   double cluster_spread, std::uint64_t seed) {
  if (class_count < 1 || per_class_train < 1 || per_class_test < 1 ||
      feature_dim < 1)
    fail(ErrorKind::Validation, "synthesize_dataset: all counts must be >= 1");
  if (cluster_spread < 0.0)
    fail(ErrorKind::Validation, "synthesize_dataset: negative cluster_spread");
  const auto words = synthetic_word_list();
  if (static_cast<std::size_t>(class_count) > words.size())
    fail(ErrorKind::Capacity,
         "synthesize_dataset: class_count " + std::to_string(class_count) +
             " exceeds word list size " + std::to_string(words.size()));
  DatasetManifest m;
  m.class_count = class_count;
  char idbuf[64];
  for (int c = 0; c < class_count; ++c) {
    Rng mean_rng = derive_rng(seed, "class-mean", static_cast<std::uint64_t>(c));
    std::vector<double> mean(static_cast<std::size_t>(feature_dim));
    for (auto& v : mean) v = mean_rng.uniform(-1.0, 1.0);
    Rng ex_rng = derive_rng(seed, "class-examples",
                            static_cast<std::uint64_t>(c));
    auto emit = [&](Partition part, int index) {
      Example e;
      std::snprintf(idbuf, sizeof(idbuf), "c%03d_%s%03d", c,
                    part == Partition::Train ? "train" : "test", index);
      e.example_id = idbuf;
      e.features.resize(static_cast<std::size_t>(feature_dim));
      for (std::size_t j = 0; j < e.features.size(); ++j)
        e.features[j] = mean[j] + cluster_spread * ex_rng.gaussian();
      e.class_id = c;
      e.class_word = words[static_cast<std::size_t>(c)];
      e.partition = part;
      m.examples.push_back(std::move(e));
    };
    for (int i = 0; i < per_class_train; ++i) emit(Partition::Train, i);
    for (int i = 0; i < per_class_test; ++i) emit(Partition::Test, i);
  }
  validate_manifest(m);
  return m;
}

}  // namespace svt
