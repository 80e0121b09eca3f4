#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "svt/autodiff.hpp"
#include "svt/embedding.hpp"
#include "svt/image.hpp"
#include "svt/manifest.hpp"
#include "svt/matrix.hpp"
#include "svt/params.hpp"

namespace svt {

struct VisionConfig {
  int image_size = 32;
  int channels = 1;
  int patch_size = 4;  // also the chunk length for raw feature vectors
  int embed_dim = 16;
  int depth = 2;
  int heads = 2;
  int window_size = 0;  // 0 = global attention on every layer
  bool shift_windows = true;  // shifted windows on odd layers when windowed
  int mlp_hidden = 32;
  int head_hidden = 16;  // hidden width of the pooled-output MLP
  int d_v = 8;
};

struct PatchSequence {
  Matrix patches;  // (M, patch_len)
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
};

// Patch grid layout for one dataset; images give a square grid, raw feature
// vectors a 1-row grid by fixed chunking.
struct InputGeometry {
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::size_t patch_len = 0;
  std::size_t patch_count() const { return grid_rows * grid_cols; }
};

InputGeometry image_geometry(const VisionConfig& config);
InputGeometry vector_geometry(const VisionConfig& config,
                              std::size_t feature_dim);
InputGeometry manifest_geometry(const VisionConfig& config,
                                const DatasetManifest& manifest);
void validate_vision_config(const VisionConfig& config,
                            const InputGeometry& geom);

// Row-major non-overlapping tiling; entries within a patch ordered
// (dy, dx, channel). Exact inverse provided for the round-trip contract.
PatchSequence patchify(const Image& image, int patch_size);
Image unpatchify(const PatchSequence& seq, int patch_size,
                 std::size_t channels);

PatchSequence chunk_features(const std::vector<double>& features,
                             std::size_t chunk_len);

// Image loaded, channel-converted and resized per config; vector payloads
// chunked. No augmentation here.
PatchSequence example_to_patches(const Example& e, const VisionConfig& config,
                                 const InputGeometry& geom);

// Destination-indexed gather permutation that groups window-local patches
// into consecutive blocks, optionally after a cyclic grid shift.
std::vector<std::size_t> window_permutation(std::size_t rows,
                                            std::size_t cols,
                                            std::size_t tile_r,
                                            std::size_t tile_c,
                                            std::size_t shift_r,
                                            std::size_t shift_c);
std::vector<std::size_t> invert_permutation(
    const std::vector<std::size_t>& perm);

using ParamVars = std::map<std::string, ad::Var>;
ParamVars lift_params(ad::Tape& tape, const ParamTable& params);

// Tensors under "vision."; weights uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
// from per-tensor seeded streams, biases and position embeddings zero, norm
// gains one.
void init_vision_params(const VisionConfig& config, const InputGeometry& geom,
                        std::uint64_t seed, ParamTable& out);

// Pre-norm transformer stack over the patch sequence (windowed or global
// attention), differentiable end to end.
ad::Var build_patch_encoder(ad::Tape& tape, ad::Var patches,
                            const ParamVars& pv, const VisionConfig& config,
                            const InputGeometry& geom);
// Mean over patches (order-canonical) followed by the output MLP -> (1, d_v).
ad::Var build_pool_project(ad::Tape& tape, ad::Var encoded,
                           const ParamVars& pv);

// Plain-value entry points (build a private tape and discard it).
Matrix encode_patches(const PatchSequence& seq, const ParamTable& params,
                      const VisionConfig& config);
Matrix pool_project(const Matrix& patch_embeddings, const ParamTable& params);

EmbeddingBatch forward_visual(const std::vector<PatchSequence>& batch,
                              const std::vector<int>& labels,
                              const ParamTable& params,
                              const VisionConfig& config);

}  // namespace svt
