#include "svt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "json.hpp"
#include "svt/error.hpp"
#include "svt/fsutil.hpp"

namespace svt {

std::filesystem::path resolve_out_root(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("SVT_OUT_DIR"); env && *env)
    return env;
  return cfg.out_dir;
}

std::filesystem::path run_directory(const ExperimentConfig& cfg) {
  return resolve_out_root(cfg) /
         (config_hash(cfg) + "-" + std::to_string(cfg.seed));
}

DatasetManifest make_manifest(const ExperimentConfig& cfg) {
  switch (cfg.dataset_kind) {
    case DatasetKind::Synthetic:
      return synthesize_dataset(cfg.synthetic.classes,
                                cfg.synthetic.train_per_class,
                                cfg.synthetic.test_per_class,
                                cfg.synthetic.feature_dim,
                                cfg.synthetic.cluster_spread,
                                cfg.synthetic.seed);
    case DatasetKind::Csv:
    case DatasetKind::Dir:
      return load_dataset_manifest(cfg.dataset_path);
  }
  fail(ErrorKind::Config, "unreachable dataset kind");
}

BackboneModel make_backbone_model(const ExperimentConfig& cfg,
                                  const DatasetManifest& manifest) {
  BackboneModel model;
  model.vision = cfg.vision;
  model.text = cfg.text;
  model.geom = manifest_geometry(cfg.vision, manifest);
  model.prompt_template = cfg.prompt_template;
  model.base_class_count = cfg.protocol.base_class_count;
  model.separate_heads = cfg.train.separate_heads;
  validate_vision_config(cfg.vision, model.geom);
  return model;
}

namespace {

nlohmann::json config_echo_json(const ExperimentConfig& cfg) {
  nlohmann::json echo = nlohmann::json::object();
  for (const auto& [key, value] : to_key_values(cfg)) echo[key] = value;
  return echo;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<Example> filtered_examples(
    const std::vector<Example>& examples,
    const std::vector<std::string>& class_filter) {
  std::set<std::string> present;
  for (const Example& e : examples) present.insert(e.class_word);
  std::set<std::string> wanted;
  for (const std::string& w : class_filter) {
    if (!present.count(w))
      fail(ErrorKind::Filter, "export filter: unknown class '" + w + "'");
    wanted.insert(w);
  }
  std::vector<Example> out;
  for (const Example& e : examples)
    if (wanted.empty() || wanted.count(e.class_word)) out.push_back(e);
  std::sort(out.begin(), out.end(),
            [](const Example& a, const Example& b) {
              return a.example_id < b.example_id;
            });
  return out;
}

struct StageGuard {
  // Persist a partial loss log + stage name if any stage throws.
  std::filesystem::path dir;
  std::vector<LossReport> partial_log;

  void abort(const std::string& stage, const std::string& what) {
    try {
      if (!partial_log.empty())
        atomic_write_file(dir / "loss_log.csv", loss_log_csv(partial_log));
      atomic_write_file(dir / "error.txt", stage + ": " + what + "\n");
    } catch (...) {
      // the original error is the one worth reporting
    }
  }
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  const std::filesystem::path dir = run_directory(cfg);
  std::filesystem::create_directories(dir);
  StageGuard guard{dir, {}};
  std::string stage = "manifest";
  try {
    const DatasetManifest manifest = make_manifest(cfg);

    stage = "splits";
    const SessionSpec spec = build_session_splits(manifest, cfg.protocol);

    stage = "train";
    const BackboneModel model = make_backbone_model(cfg, manifest);
    TrainResult trained = train_base_session(
        spec.sessions[0], model, cfg.train, {},
        [&guard](const LossReport& r) { guard.partial_log.push_back(r); });

    stage = "incremental";
    IncrementalRun inc = run_incremental_protocol(
        trained.params, spec, model, cfg.head_kind, cfg.scoring);

    stage = "metrics";
    RunResult result;
    result.config_hash = config_hash(cfg);
    result.seed = cfg.seed;
    result.per_session = inc.metrics;
    result.avg = mean_session_accuracy(
        RunResult{.per_session = inc.metrics});
    result.label = cfg.run_label();

    stage = "artifacts";
    save_session_spec(spec, dir / "session_spec.json");
    atomic_write_file(dir / "loss_log.csv", loss_log_csv(trained.log));
    result.loss_log_ref = (dir / "loss_log.csv").string();

    Checkpoint ckpt;
    ckpt.tensors = trained.params;
    for (const auto& [name, v] : trained.velocity)
      ckpt.tensors.emplace("opt.velocity." + name, v);
    ckpt.config_echo = config_echo_json(cfg);
    ckpt.seed = cfg.seed;
    ckpt.epoch = trained.final_epoch;
    save_checkpoint(ckpt, dir / "checkpoint.svt");
    result.checkpoint_ref = (dir / "checkpoint.svt").string();
    atomic_write_file(dir / "param_shapes.tsv",
                      shape_table_tsv(trained.params));

    save_classifier_state(inc.final_state, dir / "classifier_state.svt");
    atomic_write_file(dir / "results.json", run_result_to_json(result));
    atomic_write_file(
        dir / "table.md",
        emit_results_table({result}, {result.label}, TableFormat::Markdown));

    const std::vector<Example> final_tests = cumulative_test_set(
        spec, static_cast<int>(spec.sessions.size()) - 1);
    export_embeddings(trained.params, model, final_tests, cfg.export_classes,
                      dir / "embeddings.tsv");
    if (cfg.export_pca2)
      export_embeddings_pca2(trained.params, model, final_tests,
                             cfg.export_classes,
                             dir / "embeddings_pca2.tsv");
    return result;
  } catch (const Error& e) {
    guard.abort(stage, e.what());
    throw Error(e.kind(), "stage " + stage + ": " + e.what());
  } catch (const std::exception& e) {
    guard.abort(stage, e.what());
    throw;
  }
}

AblationResult run_ablation(const ExperimentConfig& cfg) {
  if (cfg.train.lambda <= 0.0)
    fail(ErrorKind::Config,
         "ablation needs train.lambda > 0 for the SV run");
  ExperimentConfig visual = cfg;
  visual.train.lambda = 0.0;
  visual.ablation = false;
  ExperimentConfig combined = cfg;
  combined.ablation = false;

  AblationResult out;
  out.visual_only = run_experiment(visual);
  out.combined = run_experiment(combined);

  // Both runs must have consumed the data in the same order: the first
  // batch's visual loss is computed before any update, so it must match
  // bit-for-bit.
  const std::string v_log = read_file(run_directory(visual) / "loss_log.csv");
  const std::string s_log =
      read_file(run_directory(combined) / "loss_log.csv");
  auto first_lvce = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    if (!std::getline(in, line)) fail(ErrorKind::Validation, "empty loss log");
    std::istringstream row(line);
    std::string field;
    for (int i = 0; i < 3; ++i) std::getline(row, field, ',');
    return field;
  };
  if (first_lvce(v_log) != first_lvce(s_log))
    fail(ErrorKind::Validation,
         "ablation wiring: first-batch visual loss differs between the "
         "lambda=0 and lambda>0 runs");

  const std::filesystem::path dir = run_directory(combined);
  out.table_path = dir / "ablation_table.md";
  atomic_write_file(out.table_path,
                    emit_results_table({out.visual_only, out.combined},
                                       {out.visual_only.label,
                                        out.combined.label},
                                       TableFormat::Markdown, 0));
  return out;
}

void export_embeddings(const ParamTable& backbone, const BackboneModel& model,
                       const std::vector<Example>& examples,
                       const std::vector<std::string>& class_filter,
                       const std::filesystem::path& path) {
  const std::vector<Example> selected =
      filtered_examples(examples, class_filter);
  if (selected.empty())
    fail(ErrorKind::Input, "export_embeddings: no examples selected");
  const EmbeddingBatch embedded = embed_examples(selected, backbone, model);
  std::ostringstream out;
  out << "example_id\tclass_word";
  for (std::size_t j = 0; j < embedded.features.cols; ++j)
    out << "\tv_" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < selected.size(); ++i) {
    out << selected[i].example_id << "\t" << selected[i].class_word;
    for (std::size_t j = 0; j < embedded.features.cols; ++j)
      out << "\t" << format_g17(embedded.features.at(i, j));
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

namespace {

// Cyclic Jacobi eigensolver for small symmetric matrices; returns
// eigenvalues (diagonal) and accumulates rotations into V.
void jacobi_eigen(Matrix& a, Matrix& v) {
  const std::size_t n = a.rows;
  v = Matrix::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a.at(p, q)) < 1e-300) continue;
        const double theta =
            (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
        const double t = std::copysign(
            1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0)), theta);
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
}

}  // namespace

Matrix pca_2d(const Matrix& features) {
  if (features.rows < 2 || features.cols < 2)
    fail(ErrorKind::Shape, "pca_2d: need at least 2x2 input");
  const std::size_t n = features.rows, d = features.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += features.at(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      centered.at(i, j) = features.at(i, j) - mean[j];
  Matrix cov(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        acc += centered.at(i, a) * centered.at(i, b);
      cov.at(a, b) = acc / static_cast<double>(n - 1);
    }
  Matrix vecs;
  jacobi_eigen(cov, vecs);
  // two largest eigenvalues; ties broken by column index for determinism
  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (cov.at(x, x) != cov.at(y, y)) return cov.at(x, x) > cov.at(y, y);
    return x < y;
  });
  Matrix proj(n, 2);
  for (int comp = 0; comp < 2; ++comp) {
    const std::size_t col = order[static_cast<std::size_t>(comp)];
    // sign convention: largest-magnitude coordinate is positive
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(vecs.at(j, col)) > std::abs(vecs.at(arg, col))) arg = j;
    const double sign = vecs.at(arg, col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        acc += centered.at(i, j) * vecs.at(j, col);
      proj.at(i, static_cast<std::size_t>(comp)) = sign * acc;
    }
  }
  return proj;
}

void export_embeddings_pca2(const ParamTable& backbone,
                            const BackboneModel& model,
                            const std::vector<Example>& examples,
                            const std::vector<std::string>& class_filter,
                            const std::filesystem::path& path) {
  const std::vector<Example> selected =
      filtered_examples(examples, class_filter);
  if (selected.size() < 2)
    fail(ErrorKind::Input, "pca export: need at least 2 examples");
  const EmbeddingBatch embedded = embed_examples(selected, backbone, model);
  const Matrix proj = pca_2d(embedded.features);
  std::ostringstream out;
  out << "example_id\tclass_word\tx\ty\n";
  for (std::size_t i = 0; i < selected.size(); ++i)
    out << selected[i].example_id << "\t" << selected[i].class_word << "\t"
        << format_g17(proj.at(i, 0)) << "\t" << format_g17(proj.at(i, 1))
        << "\n";
  atomic_write_file(path, out.str());
}

}  // namespace svt
