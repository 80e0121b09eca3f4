#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace svt {

enum class Partition { Train, Test };

// One dataset row. Payload is either an inline feature vector or a path to
// an image file, never both.
struct Example {
  std::string example_id;
  std::string image_path;        // empty for vector payloads
  std::vector<double> features;  // empty for image payloads
  int class_id = 0;
  std::string class_word;
  Partition partition = Partition::Train;

  bool has_vector() const { return image_path.empty(); }
};

struct DatasetManifest {
  std::vector<Example> examples;
  int class_count = 0;

  // 0 when the manifest carries image paths
  std::size_t feature_dim() const;
  const std::string& word_of(int class_id) const;
  std::vector<const Example*> of_class(int class_id, Partition p) const;
};

// Fixed vocabulary for synthetic class words; synthesize_dataset draws from
// it in order, so class ids map to stable words.
std::span<const char* const> synthetic_word_list();

// CSV manifest (header: example_id,path_or_vector,class_id,class_word,
// partition) or a root directory laid out as <partition>/<class_word>/<file>.
DatasetManifest load_dataset_manifest(const std::filesystem::path& path);

std::string manifest_to_csv(const DatasetManifest& m);
void save_manifest_csv(const DatasetManifest& m,
                       const std::filesystem::path& path);

// Gaussian clusters with per-class means drawn uniform in [-1,1]^dim.
// cluster_spread = 0 degenerates every example to its class mean.
DatasetManifest synthesize_dataset(int class_count, int per_class_train,
                                   int per_class_test, int feature_dim,
                                   double cluster_spread, std::uint64_t seed);

// Throws on any violated manifest invariant; load and synthesis both finish
// through this.
void validate_manifest(const DatasetManifest& m);

}  // namespace svt
