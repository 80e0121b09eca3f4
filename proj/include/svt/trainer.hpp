#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "svt/losses.hpp"
#include "svt/protocol.hpp"
#include "svt/text.hpp"
#include "svt/vision.hpp"

namespace svt {

struct TrainConfig {
  double lambda = 1.0;
  double lr_b = 0.01;
  double momentum = 0.9;
  int main_epochs = 50;
  int finetune_epochs = 0;
  double finetune_lr = 0.0002;
  double decay_factor = 0.5;
  int decay_every = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool separate_heads = false;  // score z^s with its own head
  bool augment_flip = false;    // image payloads only
  bool augment_crop = false;
  int total_epochs() const { return main_epochs + finetune_epochs; }
};

void validate_train_config(const TrainConfig& config);

// Two-phase schedule: lr_b decayed every decay_every epochs, then the decay
// restarts from finetune_lr.
double lr_at(int epoch, const TrainConfig& config);

struct LossReport {
  int epoch = 0;
  int batch_index = 0;
  double l_vce = 0.0;
  double l_sce = 0.0;
  double l_total = 0.0;
  double lr = 0.0;
};

std::string loss_log_csv(const std::vector<LossReport>& log);

// v <- momentum*v + g; p <- p - lr*v, tensor by tensor. Only tensors present
// in grads are touched; velocities materialize on first use.
void sgd_momentum_step(ParamTable& params, const ParamTable& grads,
                       ParamTable& velocity, double lr, double momentum);

// Everything the combined objective needs to know about the model being
// trained. Labels are local head indices (0..base_class_count).
struct BackboneModel {
  VisionConfig vision;
  TextConfig text;
  InputGeometry geom;
  std::string prompt_template = kDefaultPromptTemplate;
  int base_class_count = 0;
  bool separate_heads = false;
};

ParamTable init_backbone_params(const BackboneModel& model,
                                std::uint64_t seed);
bool param_trainable(const std::string& name, const BackboneModel& model);

struct TrainBatch {
  std::vector<PatchSequence> inputs;
  std::vector<int> labels;  // local head indices
};

enum class LossKind { Visual, Semantic, Combined };

struct SvceGraph {
  ad::Var l_vce;  // invalid when kind == Semantic
  ad::Var l_sce;  // invalid when the semantic branch is skipped
  ad::Var total;
};

// prompts[i] must be the prompt of local label i. With lambda == 0 the
// semantic branch is not built at all, so the visual graph and every RNG
// stream are identical to a lambda > 0 run.
SvceGraph build_svce_graph(ad::Tape& tape, const ParamVars& pv,
                           const BackboneModel& model, const TrainBatch& batch,
                           const PromptSet& prompts, LossKind kind,
                           double lambda);

struct TrainResult {
  ParamTable params;
  ParamTable velocity;
  std::vector<LossReport> log;
  int final_epoch = -1;
};

// Base-session optimization of the full backbone under L_VCE + lambda*L_SCE,
// SGD with momentum, seeded shuffles. base.class_ids order defines the local
// label mapping. on_report fires after every batch so callers can persist a
// partial loss log when a later stage aborts.
TrainResult train_base_session(
    const SessionData& base, const BackboneModel& model,
    const TrainConfig& config, ParamTable initial_params = {},
    const std::function<void(const LossReport&)>& on_report = {});

// Embeds examples with a frozen backbone; no augmentation, parallel over
// examples.
EmbeddingBatch embed_examples(const std::vector<Example>& examples,
                              const ParamTable& params,
                              const BackboneModel& model);

using GradFn =
    std::function<std::pair<double, ParamTable>(const ParamTable&)>;

struct FdResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central differences against the analytic gradient on randomly probed
// entries of every tensor; relative error uses max(|a|,|fd|) with a 1e-8
// floor under which both are considered zero.
FdResult finite_difference_check(const GradFn& fn, const ParamTable& params,
                                 int probes_per_tensor, double step,
                                 std::uint64_t seed = 17);

// Closure over a fixed batch for the gradient suites.
GradFn make_loss_grad_fn(const BackboneModel& model, const TrainBatch& batch,
                         const PromptSet& prompts, LossKind kind,
                         double lambda);

}  // namespace svt
