#include "svt/protocol.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "svt/error.hpp"
#include "svt/fsutil.hpp"
#include "svt/rng.hpp"

namespace svt {

SessionSpec build_session_splits(const DatasetManifest& manifest,
                                 const ProtocolConfig& config) {
  if (config.ways < 1 || config.shots < 1 || config.session_count < 0 ||
      config.base_class_count < 1)
    fail(ErrorKind::Protocol, "protocol config: counts out of range");
  const long needed = static_cast<long>(config.base_class_count) +
                      static_cast<long>(config.session_count) * config.ways;
  if (needed > manifest.class_count)
    fail(ErrorKind::Protocol,
         "protocol needs " + std::to_string(needed) + " classes but manifest has " +
             std::to_string(manifest.class_count));

  std::vector<int> class_order(static_cast<std::size_t>(manifest.class_count));
  for (std::size_t i = 0; i < class_order.size(); ++i)
    class_order[i] = static_cast<int>(i);
  Rng shuffle_rng = derive_rng(config.seed, "class-shuffle");
  shuffle_rng.shuffle(class_order);

  SessionSpec spec;
  spec.sessions.resize(static_cast<std::size_t>(config.session_count) + 1);
  for (int s = 0; s <= config.session_count; ++s) {
    SessionData& sd = spec.sessions[static_cast<std::size_t>(s)];
    sd.index = s;
    const int offset =
        s == 0 ? 0 : config.base_class_count + (s - 1) * config.ways;
    const int count = s == 0 ? config.base_class_count : config.ways;
    sd.class_ids.assign(class_order.begin() + offset,
                        class_order.begin() + offset + count);
    std::sort(sd.class_ids.begin(), sd.class_ids.end());
    for (int cid : sd.class_ids) {
      auto train = manifest.of_class(cid, Partition::Train);
      if (s == 0) {
        for (const Example* e : train) sd.train_examples.push_back(*e);
      } else {
        if (train.size() < static_cast<std::size_t>(config.shots))
          fail(ErrorKind::Protocol,
               "class " + std::to_string(cid) + " has only " +
                   std::to_string(train.size()) + " train examples, need " +
                   std::to_string(config.shots) + " shots");
        // partial Fisher-Yates: first `shots` slots of a seeded shuffle
        std::vector<std::size_t> idx(train.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng shot_rng = derive_rng(config.seed, "shot-sample",
                                  static_cast<std::uint64_t>(cid));
        for (int k = 0; k < config.shots; ++k) {
          const std::size_t pick =
              k + static_cast<std::size_t>(shot_rng.next_below(idx.size() - k));
          std::swap(idx[static_cast<std::size_t>(k)], idx[pick]);
          sd.train_examples.push_back(*train[idx[static_cast<std::size_t>(k)]]);
        }
      }
      for (const Example* e : manifest.of_class(cid, Partition::Test))
        sd.test_examples.push_back(*e);
    }
  }
  validate_session_spec(spec, config);
  return spec;
}

std::vector<Example> cumulative_test_set(const SessionSpec& spec, int upto) {
  if (upto < 0 || static_cast<std::size_t>(upto) >= spec.sessions.size())
    fail(ErrorKind::Index,
         "cumulative_test_set: session index " + std::to_string(upto) +
             " out of range");
  std::vector<Example> out;
  for (int s = 0; s <= upto; ++s)
    for (const Example& e : spec.sessions[static_cast<std::size_t>(s)].test_examples)
      out.push_back(e);
  return out;
}

void validate_session_spec(const SessionSpec& spec,
                           const ProtocolConfig& config) {
  if (spec.sessions.empty())
    fail(ErrorKind::Protocol, "session spec has no sessions");
  std::set<int> seen_classes;
  std::set<std::string> seen_train_ids;
  for (const SessionData& sd : spec.sessions) {
    for (int cid : sd.class_ids)
      if (!seen_classes.insert(cid).second)
        fail(ErrorKind::Protocol, "class " + std::to_string(cid) +
                                      " appears in two sessions");
    const std::size_t expect_classes =
        sd.index == 0 ? static_cast<std::size_t>(config.base_class_count)
                      : static_cast<std::size_t>(config.ways);
    if (sd.class_ids.size() != expect_classes)
      fail(ErrorKind::Protocol,
           "session " + std::to_string(sd.index) + " has " +
               std::to_string(sd.class_ids.size()) + " classes, expected " +
               std::to_string(expect_classes));
    if (sd.index > 0 &&
        sd.train_examples.size() !=
            static_cast<std::size_t>(config.ways) * config.shots)
      fail(ErrorKind::Protocol,
           "session " + std::to_string(sd.index) +
               " train size != ways*shots");
    std::set<int> session_classes(sd.class_ids.begin(), sd.class_ids.end());
    std::set<int> test_classes;
    for (const Example& e : sd.test_examples) test_classes.insert(e.class_id);
    if (test_classes != session_classes)
      fail(ErrorKind::Protocol, "session " + std::to_string(sd.index) +
                                    " test set does not cover its classes");
    for (const Example& e : sd.train_examples) {
      if (!session_classes.count(e.class_id))
        fail(ErrorKind::Protocol, "train example " + e.example_id +
                                      " outside session classes");
      if (!seen_train_ids.insert(e.example_id).second)
        fail(ErrorKind::Protocol, "train example " + e.example_id +
                                      " appears in two sessions");
    }
  }
}

std::string session_spec_to_json(const SessionSpec& spec) {
  nlohmann::json doc;
  doc["sessions"] = nlohmann::json::array();
  for (const SessionData& sd : spec.sessions) {
    nlohmann::json s;
    s["index"] = sd.index;
    s["class_ids"] = sd.class_ids;
    auto ids = [](const std::vector<Example>& v) {
      std::vector<std::string> out;
      out.reserve(v.size());
      for (const Example& e : v) out.push_back(e.example_id);
      return out;
    };
    s["train_example_ids"] = ids(sd.train_examples);
    s["test_example_ids"] = ids(sd.test_examples);
    doc["sessions"].push_back(std::move(s));
  }
  return doc.dump(2) + "\n";
}

void save_session_spec(const SessionSpec& spec,
                       const std::filesystem::path& path) {
  atomic_write_file(path, session_spec_to_json(spec));
}

}  // namespace svt
