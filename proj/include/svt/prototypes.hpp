#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "svt/embedding.hpp"
#include "svt/metrics.hpp"
#include "svt/protocol.hpp"
#include "svt/trainer.hpp"

namespace svt {

enum class Scoring { Cosine, Dot };

struct Prototype {
  int class_id = 0;
  std::vector<double> vec;
  int session_of_origin = 0;
};

// Grows monotonically; extension returns a new value and never rewrites
// stored vectors.
struct ClassifierState {
  std::vector<Prototype> prototypes;
  Scoring scoring = Scoring::Cosine;
  std::size_t dim = 0;
};

// Per-class arithmetic mean (order-canonical); one entry per class present,
// sorted by class id. With normalize, every embedding is L2-normalized
// before averaging.
std::vector<std::pair<int, std::vector<double>>> compute_prototypes(
    const EmbeddingBatch& batch, bool normalize);

ClassifierState extend_classifier(
    const ClassifierState& state,
    const std::vector<std::pair<int, std::vector<double>>>& new_prototypes,
    int session_of_origin);

// Argmax over prototypes of cosine similarity (or dot product); exact ties
// go to the lowest class id.
int predict(std::span<const double> embedding, const ClassifierState& state);

// Head interface so another session classifier can replace the prototype
// one: build on the base session, extend with each few-shot session, score
// queries.
class IncrementalHead {
 public:
  virtual ~IncrementalHead() = default;
  virtual void build(const EmbeddingBatch& base, int session) = 0;
  virtual void extend(const EmbeddingBatch& novel, int session) = 0;
  virtual int score(std::span<const double> query) const = 0;
  virtual const ClassifierState& state() const = 0;
};

class NcmHead final : public IncrementalHead {
 public:
  explicit NcmHead(Scoring scoring);
  void build(const EmbeddingBatch& base, int session) override;
  void extend(const EmbeddingBatch& novel, int session) override;
  int score(std::span<const double> query) const override;
  const ClassifierState& state() const override { return state_; }

 private:
  ClassifierState state_;
};

std::unique_ptr<IncrementalHead> make_head(const std::string& kind,
                                           Scoring scoring);

struct IncrementalRun {
  std::vector<SessionMetrics> metrics;
  ClassifierState final_state;
};

// Frozen-backbone session loop: build prototypes from the base train set,
// extend with each session's few-shot examples, evaluate Top-1 on the
// cumulative test set. Verifies by checksum that the backbone never changed.
IncrementalRun run_incremental_protocol(const ParamTable& backbone,
                                        const SessionSpec& spec,
                                        const BackboneModel& model,
                                        const std::string& head_kind,
                                        Scoring scoring);

// Same envelope as checkpoints; prototype matrix as one float32 tensor with
// ids and sessions in the header.
void save_classifier_state(const ClassifierState& state,
                           const std::filesystem::path& path);
ClassifierState load_classifier_state(const std::filesystem::path& path);

}  // namespace svt
