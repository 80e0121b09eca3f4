#include "svt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "svt/error.hpp"
#include "svt/rng.hpp"

namespace svt {

void validate_train_config(const TrainConfig& config) {
  if (config.lambda < 0.0)
    fail(ErrorKind::Config, "train config: lambda must be >= 0");
  if (config.lr_b <= 0.0 || config.finetune_lr <= 0.0)
    fail(ErrorKind::Config, "train config: learning rates must be > 0");
  if (config.momentum < 0.0 || config.momentum >= 1.0)
    fail(ErrorKind::Config, "train config: momentum must be in [0,1)");
  if (config.main_epochs < 1 || config.finetune_epochs < 0)
    fail(ErrorKind::Config, "train config: bad epoch counts");
  if (config.decay_factor <= 0.0 || config.decay_every < 1)
    fail(ErrorKind::Config, "train config: bad decay settings");
  if (config.batch_size < 1)
    fail(ErrorKind::Config, "train config: batch_size must be >= 1");
}

double lr_at(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.total_epochs())
    fail(ErrorKind::Schedule, "epoch " + std::to_string(epoch) +
                                  " outside schedule of " +
                                  std::to_string(config.total_epochs()) +
                                  " epochs");
  const bool finetune = epoch >= config.main_epochs;
  const int local = finetune ? epoch - config.main_epochs : epoch;
  const double base = finetune ? config.finetune_lr : config.lr_b;
  return base * std::pow(config.decay_factor, local / config.decay_every);
}

std::string loss_log_csv(const std::vector<LossReport>& log) {
  std::ostringstream out;
  out << "epoch,batch,l_vce,l_sce,l_total,lr\n";
  char buf[128];
  for (const LossReport& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.batch_index, r.l_vce, r.l_sce, r.l_total, r.lr);
    out << buf;
  }
  return out.str();
}

void sgd_momentum_step(ParamTable& params, const ParamTable& grads,
                       ParamTable& velocity, double lr, double momentum) {
  for (const auto& [name, g] : grads) {
    auto pit = params.find(name);
    if (pit == params.end())
      fail(ErrorKind::Shape, "sgd step: unknown tensor " + name);
    Matrix& p = pit->second;
    if (!p.same_shape(g))
      fail(ErrorKind::Shape, "sgd step: grad shape mismatch for " + name);
    if (!is_finite(g))
      fail(ErrorKind::Numeric, "sgd step: non-finite gradient for " + name);
    Matrix& v = velocity.try_emplace(name, Matrix::zeros(p.rows, p.cols))
                    .first->second;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      v.data[i] = momentum * v.data[i] + g.data[i];
      p.data[i] -= lr * v.data[i];
    }
  }
}

ParamTable init_backbone_params(const BackboneModel& model,
                                std::uint64_t seed) {
  if (model.text.d_v != model.vision.d_v)
    fail(ErrorKind::Shape, "text d_v " + std::to_string(model.text.d_v) +
                               " != vision d_v " +
                               std::to_string(model.vision.d_v));
  ParamTable params;
  init_vision_params(model.vision, model.geom, seed, params);
  init_text_params(model.text, seed, params);
  init_head_params(model.base_class_count, model.vision.d_v, seed, params,
                   "head");
  if (model.separate_heads)
    init_head_params(model.base_class_count, model.vision.d_v, seed, params,
                     "head_s");
  return params;
}

bool param_trainable(const std::string& name, const BackboneModel& model) {
  if (name.starts_with("vision.") || name.starts_with("head"))
    return true;
  return text_param_trainable(name, model.text);
}

SvceGraph build_svce_graph(ad::Tape& tape, const ParamVars& pv,
                           const BackboneModel& model, const TrainBatch& batch,
                           const PromptSet& prompts, LossKind kind,
                           double lambda) {
  if (lambda < 0.0) fail(ErrorKind::Config, "negative lambda");
  if (batch.inputs.empty() || batch.inputs.size() != batch.labels.size())
    fail(ErrorKind::Shape, "training batch: inputs/labels mismatch");
  for (int y : batch.labels)
    if (y < 0 || y >= model.base_class_count)
      fail(ErrorKind::Label, "training batch: label " + std::to_string(y) +
                                 " outside base classes");
  auto head_w = pv.find("head.w");
  auto head_b = pv.find("head.b");
  if (head_w == pv.end() || head_b == pv.end())
    fail(ErrorKind::Shape, "training: classifier head tensors missing");

  SvceGraph graph;
  const bool want_visual = kind != LossKind::Semantic;
  const bool want_semantic =
      kind == LossKind::Semantic ||
      (kind == LossKind::Combined && lambda > 0.0);

  if (want_visual) {
    std::vector<ad::Var> rows;
    rows.reserve(batch.inputs.size());
    for (const PatchSequence& seq : batch.inputs) {
      ad::Var enc = build_patch_encoder(tape, tape.leaf(seq.patches), pv,
                                        model.vision, model.geom);
      rows.push_back(build_pool_project(tape, enc, pv));
    }
    ad::Var zv = tape.concat_rows(rows);
    ad::Var logits = tape.add_rowvec(tape.matmul_nt(zv, head_w->second),
                                     head_b->second);
    graph.l_vce = tape.cross_entropy_mean(logits, batch.labels);
  }

  if (want_semantic) {
    std::vector<int> unique_labels(batch.labels.begin(), batch.labels.end());
    std::sort(unique_labels.begin(), unique_labels.end());
    unique_labels.erase(
        std::unique(unique_labels.begin(), unique_labels.end()),
        unique_labels.end());
    std::vector<ad::Var> sem_rows;
    std::map<int, std::size_t> label_to_row;
    for (int y : unique_labels) {
      if (static_cast<std::size_t>(y) >= prompts.size())
        fail(ErrorKind::Label, "no prompt for local label " +
                                   std::to_string(y));
      ad::Var s = build_text_encoder(tape, prompts[static_cast<std::size_t>(y)]
                                               .token_ids,
                                     pv, model.text);
      label_to_row.emplace(y, sem_rows.size());
      sem_rows.push_back(build_projection(tape, s, pv, model.text));
    }
    ad::Var sem = tape.concat_rows(sem_rows);
    std::vector<std::size_t> item_rows;
    item_rows.reserve(batch.labels.size());
    for (int y : batch.labels) item_rows.push_back(label_to_row.at(y));
    ad::Var zs = tape.gather_rows(sem, item_rows);
    ad::Var sw = head_w->second, sb = head_b->second;
    if (model.separate_heads) {
      auto w = pv.find("head_s.w");
      auto b = pv.find("head_s.b");
      if (w == pv.end() || b == pv.end())
        fail(ErrorKind::Shape, "training: semantic head tensors missing");
      sw = w->second;
      sb = b->second;
    }
    ad::Var logits = tape.add_rowvec(tape.matmul_nt(zs, sw), sb);
    graph.l_sce = tape.cross_entropy_mean(logits, batch.labels);
  }

  switch (kind) {
    case LossKind::Visual:
      graph.total = graph.l_vce;
      break;
    case LossKind::Semantic:
      graph.total = graph.l_sce;
      break;
    case LossKind::Combined:
      graph.total = want_semantic
                        ? tape.add_scaled(graph.l_vce, graph.l_sce, lambda)
                        : graph.l_vce;
      break;
  }
  return graph;
}

namespace {

PatchSequence augmented_patches(const Example& e, const BackboneModel& model,
                                const TrainConfig& config, Rng& aug_rng) {
  if (e.has_vector() || (!config.augment_flip && !config.augment_crop))
    return example_to_patches(e, model.vision, model.geom);
  Image img = load_netpbm(e.image_path);
  img = convert_channels(img,
                         static_cast<std::size_t>(model.vision.channels));
  const std::size_t side = static_cast<std::size_t>(model.vision.image_size);
  if (img.height != side || img.width != side)
    img = resize_bilinear(img, side, side);
  if (config.augment_flip && aug_rng.next_below(2) == 1) img = hflip(img);
  if (config.augment_crop) {
    const std::size_t pad = 4;
    const std::size_t dy = static_cast<std::size_t>(aug_rng.next_below(2 * pad + 1));
    const std::size_t dx = static_cast<std::size_t>(aug_rng.next_below(2 * pad + 1));
    img = pad_crop(img, pad, dy, dx);
  }
  return patchify(img, model.vision.patch_size);
}

ParamTable extract_grads(ad::Tape& tape, const ParamVars& pv,
                         const BackboneModel& model) {
  ParamTable grads;
  for (const auto& [name, var] : pv)
    if (param_trainable(name, model)) grads.emplace(name, tape.grad(var));
  return grads;
}

}  // namespace

TrainResult train_base_session(
    const SessionData& base, const BackboneModel& model,
    const TrainConfig& config, ParamTable initial_params,
    const std::function<void(const LossReport&)>& on_report) {
  validate_train_config(config);
  if (base.index != 0)
    fail(ErrorKind::Protocol, "train_base_session: session index must be 0");
  if (static_cast<int>(base.class_ids.size()) != model.base_class_count)
    fail(ErrorKind::Protocol,
         "train_base_session: model expects " +
             std::to_string(model.base_class_count) + " base classes, got " +
             std::to_string(base.class_ids.size()));

  // local label = position of the class id in the (sorted) base class list
  std::map<int, int> global_to_local;
  for (std::size_t i = 0; i < base.class_ids.size(); ++i)
    global_to_local.emplace(base.class_ids[i], static_cast<int>(i));
  std::vector<std::pair<int, std::string>> classes;
  {
    std::map<int, std::string> words;
    for (const Example& e : base.train_examples)
      words.emplace(e.class_id, e.class_word);
    for (int cid : base.class_ids) {
      auto it = words.find(cid);
      if (it == words.end())
        fail(ErrorKind::Protocol, "base session: class " +
                                      std::to_string(cid) +
                                      " has no train examples");
      classes.emplace_back(cid, it->second);
    }
  }
  const PromptSet prompts =
      build_prompt_set(classes, model.prompt_template, model.text);

  TrainResult result;
  result.params = initial_params.empty()
                      ? init_backbone_params(model, config.seed)
                      : std::move(initial_params);

  std::vector<std::size_t> order(base.train_examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.total_epochs(); ++epoch) {
    const double lr = lr_at(epoch, config);
    Rng shuffle_rng = derive_rng(config.seed, "epoch-shuffle",
                                 static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    Rng aug_rng = derive_rng(config.seed, "augment",
                             static_cast<std::uint64_t>(epoch));
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      TrainBatch batch;
      for (std::size_t i = start; i < stop; ++i) {
        const Example& e = base.train_examples[order[i]];
        batch.inputs.push_back(augmented_patches(e, model, config, aug_rng));
        batch.labels.push_back(global_to_local.at(e.class_id));
      }
      ad::Tape tape;
      ParamVars pv = lift_params(tape, result.params);
      SvceGraph graph = build_svce_graph(tape, pv, model, batch, prompts,
                                         LossKind::Combined, config.lambda);
      LossReport report;
      report.epoch = epoch;
      report.batch_index = batch_index;
      report.lr = lr;
      report.l_vce = tape.value(graph.l_vce).at(0, 0);
      report.l_sce = graph.l_sce.valid() ? tape.value(graph.l_sce).at(0, 0)
                                         : 0.0;
      report.l_total = tape.value(graph.total).at(0, 0);
      if (on_report) on_report(report);
      if (!std::isfinite(report.l_total))
        fail(ErrorKind::Numeric,
             "training diverged: non-finite loss at epoch " +
                 std::to_string(epoch) + " batch " +
                 std::to_string(batch_index));
      tape.backward(graph.total);
      const ParamTable grads = extract_grads(tape, pv, model);
      sgd_momentum_step(result.params, grads, result.velocity, lr,
                        config.momentum);
      result.log.push_back(report);
    }
    result.final_epoch = epoch;
  }
  return result;
}

EmbeddingBatch embed_examples(const std::vector<Example>& examples,
                              const ParamTable& params,
                              const BackboneModel& model) {
  if (examples.empty()) fail(ErrorKind::Input, "embed_examples: no examples");
  EmbeddingBatch out;
  out.features = Matrix(examples.size(),
                        static_cast<std::size_t>(model.vision.d_v));
  out.labels.resize(examples.size());
  std::string first_error;
  ErrorKind first_kind = ErrorKind::Numeric;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(examples.size());
       ++i) {
    const std::size_t idx = static_cast<std::size_t>(i);
    try {
      const PatchSequence seq =
          example_to_patches(examples[idx], model.vision, model.geom);
      ad::Tape tape;
      ParamVars pv = lift_params(tape, params);
      ad::Var enc = build_patch_encoder(tape, tape.leaf(seq.patches), pv,
                                        model.vision, model.geom);
      const Matrix z = tape.value(build_pool_project(tape, enc, pv));
      std::copy(z.data.begin(), z.data.end(), out.features.row(idx));
      out.labels[idx] = examples[idx].class_id;
    } catch (const Error& e) {
#pragma omp critical
      if (first_error.empty()) {
        first_error = e.what();
        first_kind = e.kind();
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) fail(first_kind, first_error);
  return out;
}

FdResult finite_difference_check(const GradFn& fn, const ParamTable& params,
                                 int probes_per_tensor, double step,
                                 std::uint64_t seed) {
  if (step <= 0.0) fail(ErrorKind::Config, "finite differences: step <= 0");
  auto [loss0, grads] = fn(params);
  (void)loss0;
  FdResult result;
  for (const auto& [name, tensor] : params) {
    if (tensor.size() == 0) continue;
    Rng rng = derive_rng(seed, "fd-probe", fnv1a64(name));
    const std::size_t probes =
        std::min<std::size_t>(static_cast<std::size_t>(probes_per_tensor),
                              tensor.size());
    // sample distinct entries
    std::vector<std::size_t> picks(tensor.size());
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t swap =
          k + static_cast<std::size_t>(rng.next_below(picks.size() - k));
      std::swap(picks[k], picks[swap]);
      const std::size_t idx = picks[k];
      ParamTable perturbed = params;
      Matrix& m = perturbed.at(name);
      const double orig = m.data[idx];
      m.data[idx] = orig + step;
      const double plus = fn(perturbed).first;
      m.data[idx] = orig - step;
      const double minus = fn(perturbed).first;
      const double fd = (plus - minus) / (2.0 * step);
      double analytic = 0.0;
      auto git = grads.find(name);
      if (git != grads.end()) analytic = git->second.data[idx];
      const double denom = std::max(std::abs(analytic), std::abs(fd));
      const double rel = denom < 1e-8 ? 0.0 : std::abs(analytic - fd) / denom;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = name;
        result.worst_index = idx;
        result.analytic = analytic;
        result.numeric = fd;
      }
    }
  }
  return result;
}

GradFn make_loss_grad_fn(const BackboneModel& model, const TrainBatch& batch,
                         const PromptSet& prompts, LossKind kind,
                         double lambda) {
  return [=](const ParamTable& params) {
    ad::Tape tape;
    ParamVars pv = lift_params(tape, params);
    SvceGraph graph =
        build_svce_graph(tape, pv, model, batch, prompts, kind, lambda);
    const double loss = tape.value(graph.total).at(0, 0);
    tape.backward(graph.total);
    ParamTable grads;
    for (const auto& [name, var] : pv) grads.emplace(name, tape.grad(var));
    return std::make_pair(loss, grads);
  };
}

}  // namespace svt
