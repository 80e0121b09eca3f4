#include "svt/losses.hpp"

#include <algorithm>
#include <cmath>

#include "svt/error.hpp"
#include "svt/kernels.hpp"
#include "svt/rng.hpp"

namespace svt {

void init_head_params(int class_count, int d_v, std::uint64_t seed,
                      ParamTable& out, const std::string& prefix) {
  if (class_count < 2 || d_v < 1)
    fail(ErrorKind::Shape, "classifier head needs >= 2 classes");
  Rng rng = derive_rng(seed, "init", fnv1a64(prefix + ".w"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_v));
  out.emplace(prefix + ".w",
              Matrix::uniform(static_cast<std::size_t>(class_count),
                              static_cast<std::size_t>(d_v), -bound, bound,
                              rng));
  out.emplace(prefix + ".b",
              Matrix::zeros(1, static_cast<std::size_t>(class_count)));
}

ClassifierHead head_from_params(const ParamTable& params,
                                const std::string& prefix) {
  auto w = params.find(prefix + ".w");
  auto b = params.find(prefix + ".b");
  if (w == params.end() || b == params.end())
    fail(ErrorKind::Shape, "no classifier head tensors under '" + prefix +
                               ".'");
  return {w->second, b->second};
}

double cross_entropy(std::span<const double> logits, int true_class) {
  if (logits.size() < 2)
    fail(ErrorKind::Shape, "cross_entropy: need at least 2 classes");
  if (true_class < 0 || static_cast<std::size_t>(true_class) >= logits.size())
    fail(ErrorKind::Label, "cross_entropy: class " +
                               std::to_string(true_class) + " outside [0," +
                               std::to_string(logits.size()) + ")");
  double mx = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v))
      fail(ErrorKind::Numeric, "cross_entropy: non-finite logit");
    mx = std::max(mx, v);
  }
  double lse = 0.0;
  for (double v : logits) lse += std::exp(v - mx);
  return std::log(lse) + mx - logits[static_cast<std::size_t>(true_class)];
}

namespace {

double batch_ce(const EmbeddingBatch& batch, const ClassifierHead& head,
                const char* what) {
  if (batch.features.rows == 0)
    fail(ErrorKind::Input, std::string(what) + ": empty batch");
  if (batch.labels.size() != batch.features.rows)
    fail(ErrorKind::Shape, std::string(what) + ": labels/features mismatch");
  if (batch.features.cols != head.weights.cols)
    fail(ErrorKind::Shape, std::string(what) + ": embedding dim " +
                               std::to_string(batch.features.cols) +
                               " != head dim " +
                               std::to_string(head.weights.cols));
  for (int y : batch.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= head.weights.rows)
      fail(ErrorKind::Label, std::string(what) + ": label " +
                                 std::to_string(y) + " outside head rows");
  Matrix logits = kernels::matmul_nt(batch.features, head.weights);
  std::vector<double> per_item(batch.features.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    for (std::size_t j = 0; j < logits.cols; ++j)
      logits.at(i, j) += head.biases.at(0, j);
    per_item[i] = cross_entropy(logits.row_span(i), batch.labels[i]);
  }
  return stable_sum(per_item) / static_cast<double>(per_item.size());
}

}  // namespace

double visual_ce_loss(const EmbeddingBatch& batch,
                      const ClassifierHead& head) {
  return batch_ce(batch, head, "visual_ce_loss");
}

double semantic_ce_loss(const EmbeddingBatch& batch,
                        const ClassifierHead& head) {
  return batch_ce(batch, head, "semantic_ce_loss");
}

double total_loss(double l_vce, double l_sce, double lambda) {
  if (lambda < 0.0)
    fail(ErrorKind::Config, "total_loss: negative lambda");
  if (!std::isfinite(l_vce) || !std::isfinite(l_sce))
    fail(ErrorKind::Numeric, "total_loss: non-finite component");
  return l_vce + lambda * l_sce;
}

}  // namespace svt
