// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Each criterion is self-contained and uses frozen seeds.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "paper_fixtures.hpp"
#include "svt/harness.hpp"
#include "svt/fsutil.hpp"
#include "test_util.hpp"

using namespace svt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

// ---------------------------------------------------------------- 1
Outcome metric_oracle_fixtures() {
  Outcome out;
  int rows = 0;
  for (const auto& table : fixtures::benchmark_tables()) {
    for (const auto& row : table.rows) {
      ++rows;
      const double avg = average_accuracy(row.sessions);
      if (std::abs(avg - row.printed_avg) > 0.005) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "%s %s: mean of printed cells %.4f vs printed Avg "
                      "%.2f (|diff| %.4f > 0.005)",
                      table.name.c_str(), row.name.c_str(), avg,
                      row.printed_avg, std::abs(avg - row.printed_avg));
        out.expect(false, buf);
      }
      if (row.has_improvement) {
        const double imp =
            relative_improvement(table.reference_avg, row.printed_avg);
        out.expect(std::abs(imp - row.printed_improvement) <= 0.01,
                   table.name + " " + row.name + ": improvement mismatch");
      }
    }
  }
  if (out.pass) out.detail = std::to_string(rows) + " rows reproduced";
  return out;
}

// shared tiny model for the gradient and identity criteria:
// 8x8 single-channel input, patch 4, depth 1, heads 1, d_v=8, d_s=6,
// 3 base classes
struct TinyRig {
  BackboneModel model;
  TrainBatch batch;
  PromptSet prompts;
  ParamTable params;
};

TinyRig make_tiny_rig(std::uint64_t seed) {
  TinyRig rig;
  VisionConfig vision;
  vision.image_size = 8;
  vision.channels = 1;
  vision.patch_size = 4;
  vision.embed_dim = 8;
  vision.depth = 1;
  vision.heads = 1;
  vision.window_size = 0;
  vision.mlp_hidden = 12;
  vision.head_hidden = 8;
  vision.d_v = 8;
  TextConfig text;
  text.vocab_size = 256;
  text.max_len = 8;
  text.token_dim = 8;
  text.depth = 1;
  text.heads = 1;
  text.d_s = 6;
  text.d_v = 8;
  rig.model.vision = vision;
  rig.model.text = text;
  rig.model.geom = image_geometry(vision);
  rig.model.base_class_count = 3;

  Rng rng(seed);
  for (int i = 0; i < 6; ++i) {
    rig.batch.inputs.push_back(PatchSequence{
        testutil::rand_matrix(4, rig.model.geom.patch_len, rng), 2, 2});
    rig.batch.labels.push_back(i % 3);
  }
  rig.prompts = build_prompt_set(
      {{0, "whale"}, {1, "wolf"}, {2, "woman"}},
      rig.model.prompt_template, text);
  rig.params = init_backbone_params(rig.model, seed);
  return rig;
}

// ---------------------------------------------------------------- 2
Outcome gradient_suite() {
  Outcome out;
  const TinyRig rig = make_tiny_rig(2024);
  auto check = [&](const char* name, LossKind kind, double lambda) {
    const GradFn fn = make_loss_grad_fn(rig.model, rig.batch, rig.prompts,
                                        kind, lambda);
    const FdResult r = finite_difference_check(fn, rig.params, 3, 1e-5);
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%s: max rel error %.3e", name,
                  r.max_rel_error);
    out.expect(r.max_rel_error < 1e-4, buf);
  };
  check("L_VCE", LossKind::Visual, 0.0);
  check("L_SCE", LossKind::Semantic, 0.0);
  check("L_SVCE(0.5)", LossKind::Combined, 0.5);
  check("L_SVCE(1)", LossKind::Combined, 1.0);
  check("L_SVCE(2)", LossKind::Combined, 2.0);
  if (out.pass) out.detail = "5 gradient checks < 1e-4";
  return out;
}

// ---------------------------------------------------------------- 3
Outcome loss_identity_suite() {
  Outcome out;
  for (int c : {2, 4, 10}) {
    const std::vector<double> logits(static_cast<std::size_t>(c), 1.25);
    out.expect(std::abs(cross_entropy(logits, 0) -
                        std::log(static_cast<double>(c))) < 1e-12,
               "uniform-logit cross entropy != ln C for C=" +
                   std::to_string(c));
  }
  // affinity in lambda with slope exactly L_SCE, on real model losses
  const TinyRig rig = make_tiny_rig(31);
  ad::Tape tape;
  ParamVars pv = lift_params(tape, rig.params);
  const SvceGraph g = build_svce_graph(tape, pv, rig.model, rig.batch,
                                       rig.prompts, LossKind::Combined, 1.0);
  const double l_vce = tape.value(g.l_vce).at(0, 0);
  const double l_sce = tape.value(g.l_sce).at(0, 0);
  const double at_half = total_loss(l_vce, l_sce, 0.5);
  const double at_one = total_loss(l_vce, l_sce, 1.0);
  const double at_two = total_loss(l_vce, l_sce, 2.0);
  const double tol = 1e-12 * std::max(1.0, std::abs(l_sce));
  out.expect(std::abs((at_one - at_half) / 0.5 - l_sce) <= tol,
             "slope over (0.5,1) != L_SCE");
  out.expect(std::abs((at_two - at_one) / 1.0 - l_sce) <= tol,
             "slope over (1,2) != L_SCE");
  out.expect(total_loss(l_vce, l_sce, 0.0) == l_vce,
             "lambda=0 does not reduce to L_VCE exactly");
  if (out.pass) out.detail = "ln C to 1e-12; affine in lambda with exact slope";
  return out;
}

// ---------------------------------------------------------------- 4
Outcome protocol_suite() {
  Outcome out;
  Rng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int classes = 6 + static_cast<int>(rng.next_below(18));
    const int per_train = 2 + static_cast<int>(rng.next_below(5));
    const DatasetManifest manifest = synthesize_dataset(
        classes, per_train, 1, 4, 0.3,
        9000 + static_cast<std::uint64_t>(trial));
    const int base =
        2 + static_cast<int>(rng.next_below(
                static_cast<std::uint64_t>(classes - 3)));
    const int ways = 1 + static_cast<int>(rng.next_below(2));
    const int max_sessions = (classes - base) / ways;
    const int sessions =
        max_sessions == 0 ? 0
                          : static_cast<int>(rng.next_below(
                                static_cast<std::uint64_t>(max_sessions + 1)));
    const int shots = 1 + static_cast<int>(rng.next_below(
                              static_cast<std::uint64_t>(per_train)));
    const ProtocolConfig cfg{base, sessions, ways, shots,
                             5000 + static_cast<std::uint64_t>(trial)};
    const SessionSpec spec = build_session_splits(manifest, cfg);
    try {
      validate_session_spec(spec, cfg);  // disjointness + way/shot counts
    } catch (const std::exception& e) {
      out.expect(false, std::string("trial ") + std::to_string(trial) + ": " +
                            e.what());
      continue;
    }
    // cumulative monotonicity as strict class-set growth
    std::set<int> prev;
    for (int s = 0; s < static_cast<int>(spec.sessions.size()); ++s) {
      std::set<int> cur;
      for (const Example& e : cumulative_test_set(spec, s))
        cur.insert(e.class_id);
      out.expect(std::includes(cur.begin(), cur.end(), prev.begin(),
                               prev.end()) &&
                     cur.size() > prev.size(),
                 "trial " + std::to_string(trial) +
                     ": cumulative class sets not strictly monotone");
      prev = std::move(cur);
    }
    // determinism under seed replay
    const SessionSpec replay = build_session_splits(manifest, cfg);
    out.expect(session_spec_to_json(replay) == session_spec_to_json(spec),
               "trial " + std::to_string(trial) + ": replay differs");
    ++checked;
  }
  if (out.pass)
    out.detail = std::to_string(checked) + " random protocol instances";
  return out;
}

// ---------------------------------------------------------------- 5
Outcome oracle_equivalence_suite() {
  Outcome out;
  Rng rng(55);
  double worst = 0.0;
  // encoders
  for (int trial = 0; trial < 20; ++trial) {
    VisionConfig vc;
    vc.image_size = 8;
    vc.channels = 1;
    vc.patch_size = 4;
    vc.embed_dim = static_cast<int>(4 + 2 * rng.next_below(3));
    vc.depth = static_cast<int>(1 + rng.next_below(2));
    vc.heads = vc.embed_dim % 4 == 0 && rng.next_below(2) ? 2 : 1;
    vc.mlp_hidden = static_cast<int>(4 + rng.next_below(6));
    vc.head_hidden = 6;
    vc.d_v = 6;
    const InputGeometry geom = image_geometry(vc);
    ParamTable vp;
    init_vision_params(vc, geom, 100 + trial, vp);
    const PatchSequence seq{testutil::rand_matrix(4, geom.patch_len, rng), 2,
                            2};
    worst = std::max(worst,
                     testutil::max_abs_diff(
                         encode_patches(seq, vp, vc),
                         testutil::oracle_encode_patches(seq.patches, vp,
                                                         vc)));

    TextConfig tc;
    tc.token_dim = static_cast<int>(4 + 2 * rng.next_below(3));
    tc.heads = tc.token_dim % 4 == 0 && rng.next_below(2) ? 2 : 1;
    tc.depth = static_cast<int>(1 + rng.next_below(2));
    tc.d_s = 5;
    tc.d_v = 6;
    ParamTable tp;
    init_text_params(tc, 200 + trial, tp);
    const auto ids = tokenize("a photo of a whale", tc);
    worst = std::max(worst, testutil::max_abs_diff(
                                encode_text(ids, tp, tc),
                                testutil::oracle_encode_text(ids, tp, tc)));
  }
  out.expect(worst < 1e-6, "encoder oracle diff " + std::to_string(worst));

  // batch losses and prototypes
  double worst_loss = 0.0, worst_proto = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 3 + static_cast<int>(rng.next_below(4));
    EmbeddingBatch batch;
    batch.features = testutil::rand_matrix(5, 6, rng);
    for (int i = 0; i < 5; ++i)
      batch.labels.push_back(static_cast<int>(
          rng.next_below(static_cast<std::uint64_t>(classes))));
    const ClassifierHead head{
        testutil::rand_matrix(static_cast<std::size_t>(classes), 6, rng),
        testutil::rand_matrix(1, static_cast<std::size_t>(classes), rng)};
    // scalar-loop loss
    double expected = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      std::vector<double> logits(static_cast<std::size_t>(classes), 0.0);
      for (int c = 0; c < classes; ++c) {
        for (std::size_t j = 0; j < 6; ++j)
          logits[static_cast<std::size_t>(c)] +=
              head.weights.at(static_cast<std::size_t>(c), j) *
              batch.features.at(i, j);
        logits[static_cast<std::size_t>(c)] += head.biases.at(
            0, static_cast<std::size_t>(c));
      }
      double mx = logits[0];
      for (double v : logits) mx = std::max(mx, v);
      double lse = 0.0;
      for (double v : logits) lse += std::exp(v - mx);
      expected += std::log(lse) + mx -
                  logits[static_cast<std::size_t>(batch.labels[i])];
    }
    expected /= 5.0;
    worst_loss = std::max(
        worst_loss, std::abs(visual_ce_loss(batch, head) - expected));
    worst_loss = std::max(
        worst_loss, std::abs(semantic_ce_loss(batch, head) - expected));

    // prototype means
    EmbeddingBatch shots;
    shots.features = testutil::rand_matrix(5, 4, rng);
    shots.labels.assign(5, 3);
    const auto protos = compute_prototypes(shots, false);
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < 5; ++i) mean += shots.features.at(i, j);
      mean /= 5.0;
      worst_proto =
          std::max(worst_proto, std::abs(protos[0].second[j] - mean));
    }
  }
  out.expect(worst_loss < 1e-6, "loss oracle diff");
  out.expect(worst_proto < 1e-6, "prototype oracle diff");
  if (out.pass) {
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "20 trials each; worst encoder diff %.2e", worst);
    out.detail = buf;
  }
  return out;
}

// ---------------------------------------------------------------- 6
Outcome frozen_backbone_suite() {
  Outcome out;
  const DatasetManifest manifest = synthesize_dataset(12, 8, 4, 16, 0.05, 66);
  const ProtocolConfig proto{6, 3, 2, 3, 66};
  const SessionSpec spec = build_session_splits(manifest, proto);
  BackboneModel model;
  model.vision.patch_size = 4;
  model.vision.embed_dim = 8;
  model.vision.depth = 1;
  model.vision.heads = 1;
  model.vision.mlp_hidden = 10;
  model.vision.head_hidden = 8;
  model.vision.d_v = 8;
  model.text.token_dim = 8;
  model.text.heads = 1;
  model.text.d_s = 6;
  model.text.d_v = 8;
  model.geom = manifest_geometry(model.vision, manifest);
  model.base_class_count = 6;
  const ParamTable backbone = init_backbone_params(model, 66);

  const std::uint64_t checksum = param_checksum(backbone);
  const IncrementalRun run =
      run_incremental_protocol(backbone, spec, model, "ncm", Scoring::Cosine);
  out.expect(param_checksum(backbone) == checksum,
             "backbone checksum changed");
  for (std::size_t s = 0; s < run.metrics.size(); ++s)
    out.expect(run.metrics[s].n_classes_seen ==
                   6 + static_cast<int>(s) * 2,
               "prototype count after session " + std::to_string(s));

  // stored prototypes stay bit-identical across manual extensions
  NcmHead head(Scoring::Cosine);
  head.build(embed_examples(spec.sessions[0].train_examples, backbone, model),
             0);
  const ClassifierState before = head.state();
  head.extend(embed_examples(spec.sessions[1].train_examples, backbone,
                             model),
              1);
  const ClassifierState& after = head.state();
  out.expect(after.prototypes.size() == before.prototypes.size() + 2,
             "extension did not add ways prototypes");
  for (std::size_t i = 0; i < before.prototypes.size(); ++i) {
    out.expect(after.prototypes[i].class_id == before.prototypes[i].class_id,
               "prototype id moved");
    out.expect(after.prototypes[i].vec == before.prototypes[i].vec,
               "stored prototype vector changed bit-wise");
  }
  if (out.pass)
    out.detail = "checksum stable; growth 6 -> 12 prototypes bit-identical";
  return out;
}

// ---------------------------------------------------------------- 7
Outcome end_to_end_suite() {
  Outcome out;
  const fs::path out_root =
      fs::temp_directory_path() / "svt_acceptance_e2e";
  fs::remove_all(out_root);
  const char* config_text = R"(
seed = 7
out_dir = PLACEHOLDER
dataset.classes = 20
dataset.train_per_class = 25
dataset.test_per_class = 10
dataset.feature_dim = 32
dataset.cluster_spread = 0.05
protocol.base_classes = 12
protocol.sessions = 4
protocol.ways = 2
protocol.shots = 5
vision.patch_size = 8
vision.embed_dim = 16
vision.depth = 1
vision.heads = 2
vision.mlp_hidden = 24
vision.head_hidden = 16
model.d_v = 8
text.token_dim = 16
text.heads = 2
text.d_s = 8
train.lambda = 1
train.epochs = 30
train.batch_size = 32
)";
  std::string text(config_text);
  text.replace(text.find("PLACEHOLDER"), 11, out_root.string());
  const ExperimentConfig cfg =
      experiment_from_config(Config::parse_string(text));
  const AblationResult ab = run_ablation(cfg);

  // (a) final epoch's mean training loss below the first epoch's (SV run)
  const std::string log = read_file(run_directory(cfg) / "loss_log.csv");
  std::istringstream in(log);
  std::string header, line;
  std::getline(in, header);
  std::map<int, std::pair<double, int>> per_epoch;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream r(line);
    std::string f;
    std::getline(r, f, ',');
    const int epoch = std::stoi(f);
    for (int i = 0; i < 4; ++i) std::getline(r, f, ',');
    per_epoch[epoch].first += std::stod(f);
    per_epoch[epoch].second += 1;
  }
  const double first_epoch_loss =
      per_epoch.begin()->second.first / per_epoch.begin()->second.second;
  const double last_epoch_loss =
      per_epoch.rbegin()->second.first / per_epoch.rbegin()->second.second;
  out.expect(last_epoch_loss < first_epoch_loss,
             "final epoch loss not below initial epoch loss");

  // (b) separable clusters keep every session's Top-1 at or above 90%
  for (const SessionMetrics& m : ab.combined.per_session) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "session %d top1 %.2f%% < 90%%",
                  m.session_index, m.top1);
    out.expect(m.top1 >= 90.0, buf);
  }

  // (c) ablation table mirrors the V-/SV- row structure
  const std::string table = read_file(ab.table_path);
  out.expect(table.find("| V-WinT |") != std::string::npos,
             "missing V- row");
  out.expect(table.find("| SV-WinT |") != std::string::npos,
             "missing SV- row");
  out.expect(std::count(table.begin(), table.end(), '\n') == 4,
             "table is not exactly two data rows");
  if (out.pass) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "epoch losses %.3f -> %.3f; session accuracies %.1f..%.1f%%",
                  first_epoch_loss, last_epoch_loss,
                  ab.combined.per_session.front().top1,
                  ab.combined.per_session.back().top1);
    out.detail = buf;
  }
  fs::remove_all(out_root);
  return out;
}

// ---------------------------------------------------------------- 8
Outcome parameter_accounting_suite() {
  Outcome out;
  ParamTable linear;
  linear.emplace("w", Matrix(10, 5));
  linear.emplace("b", Matrix(1, 5));
  out.expect(count_parameters(linear) == 55, "10->5 linear with bias != 55");

  for (int variant = 0; variant < 3; ++variant) {
    VisionConfig vc;
    vc.image_size = 8 + 8 * variant;
    vc.channels = variant == 2 ? 3 : 1;
    vc.patch_size = 4;
    vc.embed_dim = 8 + 4 * variant;
    vc.depth = 1 + variant;
    vc.heads = variant == 1 ? 2 : 1;
    vc.mlp_hidden = 10 + variant;
    vc.head_hidden = 8;
    vc.d_v = 8;
    ParamTable params;
    init_vision_params(vc, image_geometry(vc), 80 + variant, params);
    // recompute the total from the emitted shape table
    std::istringstream tsv(shape_table_tsv(params));
    std::string line;
    std::getline(tsv, line);
    std::size_t total = 0;
    while (std::getline(tsv, line)) {
      std::istringstream row(line);
      std::string name;
      std::size_t rows, cols, count;
      row >> name >> rows >> cols >> count;
      total += rows * cols;
    }
    out.expect(total == count_parameters(params),
               "config " + std::to_string(variant) +
                   ": shape-table sum != count_parameters");
  }
  if (out.pass) out.detail = "3 configs + linear fixture";
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"metric-oracle fixtures (Tables I-III)", metric_oracle_fixtures},
      {"gradient suite (finite differences < 1e-4)", gradient_suite},
      {"loss identities (ln C, affinity in lambda)", loss_identity_suite},
      {"protocol suite (100 random instances)", protocol_suite},
      {"oracle equivalence (scalar-loop checks)", oracle_equivalence_suite},
      {"frozen backbone and classifier growth", frozen_backbone_suite},
      {"end-to-end synthetic FSCIL with ablation", end_to_end_suite},
      {"parameter accounting", parameter_accounting_suite},
  };
  int failures = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start)
            .count();
    std::printf("[%s] criterion %d: %s (%.2fs)%s%s\n",
                out.pass ? "PASS" : "FAIL", index, c.name, secs,
                out.detail.empty() ? "" : " - ", out.detail.c_str());
    failures += out.pass ? 0 : 1;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
