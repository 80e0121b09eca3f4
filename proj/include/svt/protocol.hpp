#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svt/manifest.hpp"

namespace svt {

struct ProtocolConfig {
  int base_class_count = 0;
  int session_count = 0;  // incremental sessions (base not counted)
  int ways = 0;
  int shots = 0;
  std::uint64_t seed = 0;
};

struct SessionData {
  int index = 0;
  std::vector<int> class_ids;  // sorted ascending
  std::vector<Example> train_examples;
  std::vector<Example> test_examples;
};

struct SessionSpec {
  std::vector<SessionData> sessions;  // sessions[0] is the base session
};

// Seed-keyed class shuffle decides which classes are base vs incremental;
// incremental sessions take `ways` classes each, with `shots` train examples
// sampled per class without replacement. Base session keeps every train
// example of its classes; test sets are always the full test partition.
SessionSpec build_session_splits(const DatasetManifest& manifest,
                                 const ProtocolConfig& config);

std::vector<Example> cumulative_test_set(const SessionSpec& spec, int upto);

// All SessionSpec invariants (disjointness, counts, coverage); throws on the
// first violation. Exercised directly by the property suite.
void validate_session_spec(const SessionSpec& spec,
                           const ProtocolConfig& config);

std::string session_spec_to_json(const SessionSpec& spec);
void save_session_spec(const SessionSpec& spec,
                       const std::filesystem::path& path);

}  // namespace svt
