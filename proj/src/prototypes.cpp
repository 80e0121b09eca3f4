#include "svt/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "svt/error.hpp"
#include "svt/params.hpp"

namespace svt {

namespace {

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

std::vector<std::pair<int, std::vector<double>>> compute_prototypes(
    const EmbeddingBatch& batch, bool normalize) {
  if (batch.features.rows == 0)
    fail(ErrorKind::Input, "compute_prototypes: empty batch");
  if (batch.labels.size() != batch.features.rows)
    fail(ErrorKind::Shape, "compute_prototypes: labels/features mismatch");
  const std::size_t dim = batch.features.cols;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < batch.labels.size(); ++i)
    by_class[batch.labels[i]].push_back(i);

  std::vector<std::pair<int, std::vector<double>>> out;
  out.reserve(by_class.size());
  std::vector<double> col;
  for (const auto& [cid, rows] : by_class) {
    std::vector<std::vector<double>> members;
    members.reserve(rows.size());
    for (std::size_t r : rows) {
      std::vector<double> v(batch.features.row(r),
                            batch.features.row(r) + dim);
      if (normalize) {
        const double n = l2_norm(v);
        if (n == 0.0)
          fail(ErrorKind::Numeric,
               "compute_prototypes: zero-norm embedding for class " +
                   std::to_string(cid));
        for (double& x : v) x /= n;
      }
      members.push_back(std::move(v));
    }
    std::vector<double> proto(dim);
    col.resize(members.size());
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t i = 0; i < members.size(); ++i) col[i] = members[i][j];
      proto[j] = stable_sum(col) / static_cast<double>(members.size());
    }
    out.emplace_back(cid, std::move(proto));
  }
  return out;
}

ClassifierState extend_classifier(
    const ClassifierState& state,
    const std::vector<std::pair<int, std::vector<double>>>& new_prototypes,
    int session_of_origin) {
  ClassifierState next = state;
  std::set<int> existing;
  for (const Prototype& p : state.prototypes) existing.insert(p.class_id);
  for (const auto& [cid, vec] : new_prototypes) {
    if (!existing.insert(cid).second)
      fail(ErrorKind::Conflict, "extend_classifier: class " +
                                    std::to_string(cid) +
                                    " already has a prototype");
    if (next.dim == 0) next.dim = vec.size();
    if (vec.size() != next.dim)
      fail(ErrorKind::Shape, "extend_classifier: prototype dim mismatch");
    for (double v : vec)
      if (!std::isfinite(v))
        fail(ErrorKind::Numeric, "extend_classifier: non-finite prototype "
                                 "for class " + std::to_string(cid));
    next.prototypes.push_back({cid, vec, session_of_origin});
  }
  return next;
}

int predict(std::span<const double> embedding, const ClassifierState& state) {
  if (state.prototypes.empty())
    fail(ErrorKind::Input, "predict: empty classifier state");
  if (embedding.size() != state.dim)
    fail(ErrorKind::Shape, "predict: embedding dim mismatch");
  for (double v : embedding)
    if (!std::isfinite(v))
      fail(ErrorKind::Numeric, "predict: non-finite query embedding");
  double query_norm = 1.0;
  if (state.scoring == Scoring::Cosine) {
    query_norm = l2_norm(embedding);
    if (query_norm == 0.0)
      fail(ErrorKind::Numeric, "predict: zero-norm query under cosine");
  }
  double best = 0.0;
  int best_class = -1;
  for (const Prototype& p : state.prototypes) {
    double score = 0.0;
    for (std::size_t j = 0; j < state.dim; ++j)
      score += embedding[j] * p.vec[j];
    if (state.scoring == Scoring::Cosine) {
      const double pn = l2_norm(p.vec);
      if (pn == 0.0)
        fail(ErrorKind::Numeric,
             "predict: zero-norm prototype for class " +
                 std::to_string(p.class_id));
      score /= query_norm * pn;
    }
    if (best_class < 0 || score > best ||
        (score == best && p.class_id < best_class)) {
      best = score;
      best_class = p.class_id;
    }
  }
  return best_class;
}

NcmHead::NcmHead(Scoring scoring) { state_.scoring = scoring; }

void NcmHead::build(const EmbeddingBatch& base, int session) {
  state_.prototypes.clear();
  state_.dim = base.features.cols;
  state_ = extend_classifier(
      state_, compute_prototypes(base, state_.scoring == Scoring::Cosine),
      session);
}

void NcmHead::extend(const EmbeddingBatch& novel, int session) {
  state_ = extend_classifier(
      state_, compute_prototypes(novel, state_.scoring == Scoring::Cosine),
      session);
}

int NcmHead::score(std::span<const double> query) const {
  return predict(query, state_);
}

std::unique_ptr<IncrementalHead> make_head(const std::string& kind,
                                           Scoring scoring) {
  if (kind == "ncm") return std::make_unique<NcmHead>(scoring);
  fail(ErrorKind::Config, "unknown head kind: " + kind);
}

namespace {

SessionMetrics evaluate_session(const IncrementalHead& head,
                                const std::vector<Example>& tests,
                                const ParamTable& backbone,
                                const BackboneModel& model, int session) {
  const EmbeddingBatch embedded = embed_examples(tests, backbone, model);
  std::vector<int> predictions(tests.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(tests.size()); ++i)
    predictions[static_cast<std::size_t>(i)] =
        head.score(embedded.features.row_span(static_cast<std::size_t>(i)));
  SessionMetrics m;
  m.session_index = session;
  m.top1 = top1_accuracy(predictions, embedded.labels);
  m.n_test = static_cast<int>(tests.size());
  m.n_classes_seen = static_cast<int>(head.state().prototypes.size());
  return m;
}

}  // namespace

IncrementalRun run_incremental_protocol(const ParamTable& backbone,
                                        const SessionSpec& spec,
                                        const BackboneModel& model,
                                        const std::string& head_kind,
                                        Scoring scoring) {
  if (spec.sessions.empty())
    fail(ErrorKind::Protocol, "incremental protocol: empty session spec");
  const std::uint64_t checksum_before = param_checksum(backbone);
  auto head = make_head(head_kind, scoring);

  IncrementalRun run;
  for (const SessionData& sd : spec.sessions) {
    const EmbeddingBatch embedded =
        embed_examples(sd.train_examples, backbone, model);
    if (sd.index == 0) {
      head->build(embedded, sd.index);
    } else {
      head->extend(embedded, sd.index);
    }
    const std::vector<Example> tests = cumulative_test_set(spec, sd.index);
    run.metrics.push_back(
        evaluate_session(*head, tests, backbone, model, sd.index));
  }
  run.final_state = head->state();
  if (param_checksum(backbone) != checksum_before)
    fail(ErrorKind::Validation,
         "frozen-backbone violation: parameter checksum changed during "
         "incremental inference");
  return run;
}

void save_classifier_state(const ClassifierState& state,
                           const std::filesystem::path& path) {
  Checkpoint ckpt;
  Matrix protos(state.prototypes.size(), state.dim);
  std::vector<int> ids, sessions;
  for (std::size_t i = 0; i < state.prototypes.size(); ++i) {
    const Prototype& p = state.prototypes[i];
    std::copy(p.vec.begin(), p.vec.end(), protos.row(i));
    ids.push_back(p.class_id);
    sessions.push_back(p.session_of_origin);
  }
  ckpt.tensors.emplace("prototypes", std::move(protos));
  ckpt.config_echo = {{"kind", "classifier_state"},
                      {"scoring",
                       state.scoring == Scoring::Cosine ? "cosine" : "dot"},
                      {"class_ids", ids},
                      {"sessions", sessions}};
  save_checkpoint(ckpt, path);
}

ClassifierState load_classifier_state(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.config_echo.value("kind", "") != "classifier_state")
    fail(ErrorKind::Validation, "not a classifier state file: " +
                                    path.string());
  ClassifierState state;
  state.scoring = ckpt.config_echo.value("scoring", "cosine") == "dot"
                      ? Scoring::Dot
                      : Scoring::Cosine;
  const auto ids = ckpt.config_echo.at("class_ids").get<std::vector<int>>();
  const auto sessions =
      ckpt.config_echo.at("sessions").get<std::vector<int>>();
  const Matrix& protos = ckpt.tensors.at("prototypes");
  if (ids.size() != protos.rows || sessions.size() != protos.rows)
    fail(ErrorKind::Validation, "classifier state: header/payload mismatch");
  state.dim = protos.cols;
  for (std::size_t i = 0; i < protos.rows; ++i)
    state.prototypes.push_back(
        {ids[i],
         std::vector<double>(protos.row(i), protos.row(i) + protos.cols),
         sessions[i]});
  return state;
}

}  // namespace svt
