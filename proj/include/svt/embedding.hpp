#pragma once

#include <vector>

#include "svt/matrix.hpp"

namespace svt {

// Batch of d_v-dimensional feature rows with aligned labels.
struct EmbeddingBatch {
  Matrix features;  // (batch, d_v)
  std::vector<int> labels;
};

}  // namespace svt
