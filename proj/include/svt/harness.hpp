#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "svt/config.hpp"
#include "svt/metrics.hpp"
#include "svt/prototypes.hpp"

namespace svt {

// out_dir resolution: SVT_OUT_DIR env var wins over the config value; the
// run directory is <out>/<config_hash>-<seed>/.
std::filesystem::path resolve_out_root(const ExperimentConfig& cfg);
std::filesystem::path run_directory(const ExperimentConfig& cfg);

DatasetManifest make_manifest(const ExperimentConfig& cfg);
BackboneModel make_backbone_model(const ExperimentConfig& cfg,
                                  const DatasetManifest& manifest);

// Full pipeline: manifest -> splits -> base training -> incremental
// protocol -> metrics + artifacts (results.json, loss_log.csv, table.md,
// checkpoint.svt, param_shapes.tsv, session_spec.json, classifier_state.svt,
// embeddings.tsv[, embeddings_pca2.tsv]). A stage failure persists the
// partial loss log and an error.txt naming the stage, then rethrows.
RunResult run_experiment(const ExperimentConfig& cfg);

struct AblationResult {
  RunResult visual_only;  // lambda = 0, row "V-<encoder>"
  RunResult combined;     // row "SV-<encoder>"
  std::filesystem::path table_path;
};

// Runs the lambda=0 / lambda>0 pair; both runs must see the identical first
// batch (asserted on the first-batch visual loss).
AblationResult run_ablation(const ExperimentConfig& cfg);

// TSV export: example_id, class_word, then the d_v embedding columns, rows
// sorted by example_id. Filter words must all be present among the examples.
void export_embeddings(const ParamTable& backbone, const BackboneModel& model,
                       const std::vector<Example>& examples,
                       const std::vector<std::string>& class_filter,
                       const std::filesystem::path& path);

// Exact deterministic 2-D PCA (Jacobi eigensolver, sign-fixed components).
Matrix pca_2d(const Matrix& features);
void export_embeddings_pca2(const ParamTable& backbone,
                            const BackboneModel& model,
                            const std::vector<Example>& examples,
                            const std::vector<std::string>& class_filter,
                            const std::filesystem::path& path);

}  // namespace svt
