#pragma once

#include <cstdint>
#include <span>

#include "svt/embedding.hpp"
#include "svt/matrix.hpp"
#include "svt/params.hpp"

namespace svt {

// Fully-connected scoring layer shared by the visual and semantic losses.
struct ClassifierHead {
  Matrix weights;  // (classes, d_v)
  Matrix biases;   // (1, classes)
};

void init_head_params(int class_count, int d_v, std::uint64_t seed,
                      ParamTable& out, const std::string& prefix = "head");
ClassifierHead head_from_params(const ParamTable& params,
                                const std::string& prefix = "head");

// -log softmax(logits)[true_class], max-subtracted log-sum-exp.
double cross_entropy(std::span<const double> logits, int true_class);

// Mean cross-entropy of W·z_i + b against labels; summation over the batch
// is order-canonical.
double visual_ce_loss(const EmbeddingBatch& batch, const ClassifierHead& head);
double semantic_ce_loss(const EmbeddingBatch& batch,
                        const ClassifierHead& head);

double total_loss(double l_vce, double l_sce, double lambda);

}  // namespace svt
