// Command-line front end: run experiments, re-emit result tables, export
// embeddings, check gradients, inspect checkpoints.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svt/config.hpp"
#include "svt/error.hpp"
#include "svt/fsutil.hpp"
#include "svt/harness.hpp"

namespace {

using namespace svt;

ExperimentConfig config_from_file(const std::string& path) {
  return experiment_from_config(Config::parse_file(path));
}

ExperimentConfig config_from_checkpoint_echo(const Checkpoint& ckpt) {
  std::map<std::string, std::string> kv;
  for (const auto& [key, value] : ckpt.config_echo.items())
    kv[key] = value.get<std::string>();
  return experiment_from_config(Config(kv));
}

int cmd_run(const std::string& config_path) {
  const ExperimentConfig cfg = config_from_file(config_path);
  if (cfg.ablation) {
    const AblationResult ab = run_ablation(cfg);
    std::cout << read_file(ab.table_path);
    std::cout << "ablation table: " << ab.table_path.string() << "\n";
    return 0;
  }
  const RunResult result = run_experiment(cfg);
  for (const SessionMetrics& m : result.per_session)
    std::printf("session %d: top1 %.2f%% (%d test, %d classes)\n",
                m.session_index, m.top1, m.n_test, m.n_classes_seen);
  std::printf("avg %.2f%%\n", result.avg);
  std::cout << "results: " << run_directory(cfg).string() << "\n";
  return 0;
}

int cmd_table(const std::vector<std::string>& result_paths,
              const std::string& labels_csv, const std::string& format,
              std::size_t baseline, const std::string& out_path) {
  std::vector<RunResult> results;
  std::vector<std::string> labels;
  for (const std::string& p : result_paths)
    results.push_back(load_run_result(p));
  if (!labels_csv.empty()) {
    std::string cur;
    for (char c : labels_csv + ",") {
      if (c == ',') {
        labels.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    labels.resize(results.size(), "run");
  } else {
    for (const std::string& p : result_paths)
      labels.push_back(
          std::filesystem::path(p).parent_path().filename().string());
  }
  const std::string table = emit_results_table(
      results, labels,
      format == "csv" ? TableFormat::Csv : TableFormat::Markdown, baseline);
  if (out_path.empty()) {
    std::cout << table;
  } else {
    atomic_write_file(out_path, table);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_export(const std::string& checkpoint_path,
               const std::string& manifest_path, const std::string& classes,
               const std::string& out_path, const std::string& partition,
               bool pca2) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const ExperimentConfig cfg = config_from_checkpoint_echo(ckpt);
  const DatasetManifest manifest = load_dataset_manifest(manifest_path);
  const BackboneModel model = make_backbone_model(cfg, manifest);
  ParamTable params;
  for (const auto& [name, tensor] : ckpt.tensors)
    if (!name.starts_with("opt.")) params.emplace(name, tensor);

  std::vector<std::string> filter;
  std::string cur;
  for (char c : classes + ",") {
    if (c == ',') {
      if (!cur.empty()) filter.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  const Partition part =
      partition == "train" ? Partition::Train : Partition::Test;
  std::vector<Example> examples;
  for (const Example& e : manifest.examples)
    if (e.partition == part) examples.push_back(e);

  if (pca2) {
    export_embeddings_pca2(params, model, examples, filter, out_path);
  } else {
    export_embeddings(params, model, examples, filter, out_path);
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_check_grads(const std::string& config_path, int probes, double step) {
  const ExperimentConfig cfg = config_from_file(config_path);
  const DatasetManifest manifest = make_manifest(cfg);
  const SessionSpec spec = build_session_splits(manifest, cfg.protocol);
  const BackboneModel model = make_backbone_model(cfg, manifest);
  const SessionData& base = spec.sessions[0];

  std::map<int, int> local;
  std::vector<std::pair<int, std::string>> classes;
  for (int cid : base.class_ids) {
    local.emplace(cid, static_cast<int>(local.size()));
    classes.emplace_back(cid, manifest.word_of(cid));
  }
  const PromptSet prompts =
      build_prompt_set(classes, model.prompt_template, model.text);
  TrainBatch batch;
  const std::size_t take = std::min<std::size_t>(
      base.train_examples.size(),
      static_cast<std::size_t>(cfg.train.batch_size));
  for (std::size_t i = 0; i < take; ++i) {
    const Example& e = base.train_examples[i];
    batch.inputs.push_back(example_to_patches(e, model.vision, model.geom));
    batch.labels.push_back(local.at(e.class_id));
  }
  const ParamTable params = init_backbone_params(model, cfg.seed);

  struct Case {
    const char* name;
    LossKind kind;
    double lambda;
  };
  const Case cases[] = {{"L_VCE", LossKind::Visual, 0.0},
                        {"L_SCE", LossKind::Semantic, 0.0},
                        {"L_SVCE(lambda)", LossKind::Combined,
                         cfg.train.lambda > 0 ? cfg.train.lambda : 1.0}};
  bool ok = true;
  for (const Case& c : cases) {
    const GradFn fn =
        make_loss_grad_fn(model, batch, prompts, c.kind, c.lambda);
    const FdResult r = finite_difference_check(fn, params, probes, step);
    std::printf("%-16s max rel error %.3e (worst %s[%zu]: analytic %.6e vs "
                "fd %.6e)\n",
                c.name, r.max_rel_error, r.worst_tensor.c_str(),
                r.worst_index, r.analytic, r.numeric);
    ok = ok && r.max_rel_error < 1e-4;
  }
  std::printf("gradient check: %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_params(const std::string& checkpoint_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  ParamTable model_params, opt_state;
  for (const auto& [name, tensor] : ckpt.tensors)
    (name.starts_with("opt.") ? opt_state : model_params)
        .emplace(name, tensor);
  std::cout << shape_table_tsv(model_params);
  const std::size_t count = count_parameters(model_params);
  std::printf("total\t%zu parameters\t%.3f MB (float32)\n", count,
              parameter_megabytes(count));
  if (!opt_state.empty())
    std::printf("training state: %zu velocity tensors, epoch %d\n",
                opt_state.size(), ckpt.epoch);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic-visual guided transformer training and "
               "few-shot class-incremental evaluation"};
  app.require_subcommand(1);

  std::string config_path, labels, format = "markdown", out_path;
  std::string checkpoint_path, manifest_path, classes, partition = "test";
  std::vector<std::string> result_paths;
  std::size_t baseline = 0;
  int probes = 4;
  double step = 1e-5;
  bool pca2 = false;

  auto* run = app.add_subcommand("run", "run an experiment from a config");
  run->add_option("config", config_path, "config file")->required();

  auto* table = app.add_subcommand("table", "emit a results table");
  table->add_option("results", result_paths, "results.json files")
      ->required();
  table->add_option("--labels", labels, "comma-separated row labels");
  table->add_option("--format", format, "markdown|csv");
  table->add_option("--baseline", baseline, "baseline row index");
  table->add_option("--out", out_path, "output file (default stdout)");

  auto* exp = app.add_subcommand("export-embeddings",
                                 "embed examples with a trained checkpoint");
  exp->add_option("checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  exp->add_option("manifest", manifest_path, "dataset manifest")->required();
  exp->add_option("--classes", classes, "comma-separated class words");
  exp->add_option("--out", out_path, "output TSV")->required();
  exp->add_option("--partition", partition, "train|test (default test)");
  exp->add_flag("--pca2", pca2, "export the 2-D PCA projection instead");

  auto* grads = app.add_subcommand("check-grads",
                                   "finite-difference gradient check");
  grads->add_option("config", config_path, "config file")->required();
  grads->add_option("--probes", probes, "probes per tensor");
  grads->add_option("--step", step, "central difference step");

  auto* params = app.add_subcommand("params", "checkpoint parameter report");
  params->add_option("checkpoint", checkpoint_path, "checkpoint file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (table->parsed())
      return cmd_table(result_paths, labels, format, baseline, out_path);
    if (exp->parsed())
      return cmd_export(checkpoint_path, manifest_path, classes, out_path,
                        partition, pca2);
    if (grads->parsed()) return cmd_check_grads(config_path, probes, step);
    if (params->parsed()) return cmd_params(checkpoint_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
