#include "svt/vision.hpp"

#include <algorithm>
#include <cmath>

#include "svt/error.hpp"
#include "svt/rng.hpp"

namespace svt {

namespace {

void init_tensor(ParamTable& out, const std::string& name, std::size_t rows,
                 std::size_t cols, std::uint64_t seed, std::size_t fan_in) {
  if (fan_in == 0) {  // zeros (biases, position embeddings)
    out.emplace(name, Matrix::zeros(rows, cols));
    return;
  }
  Rng rng = derive_rng(seed, "init", fnv1a64(name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  out.emplace(name, Matrix::uniform(rows, cols, -bound, bound, rng));
}

void init_ones(ParamTable& out, const std::string& name, std::size_t cols) {
  out.emplace(name, Matrix::full(1, cols, 1.0));
}

ad::Var pv_at(const ParamVars& pv, const std::string& name) {
  auto it = pv.find(name);
  if (it == pv.end())
    fail(ErrorKind::Shape, "missing parameter tensor: " + name);
  return it->second;
}

struct WindowPlan {
  std::size_t tile_r = 1, tile_c = 1;
  bool windowed = false;
};

WindowPlan plan_windows(const VisionConfig& config,
                        const InputGeometry& geom) {
  WindowPlan plan;
  if (config.window_size <= 0) return plan;
  plan.windowed = true;
  plan.tile_r = std::min<std::size_t>(
      static_cast<std::size_t>(config.window_size), geom.grid_rows);
  plan.tile_c = std::min<std::size_t>(
      static_cast<std::size_t>(config.window_size), geom.grid_cols);
  return plan;
}

}  // namespace

InputGeometry image_geometry(const VisionConfig& config) {
  if (config.patch_size <= 0 || config.image_size <= 0 || config.channels <= 0)
    fail(ErrorKind::Shape, "vision config: non-positive image dimensions");
  if (config.image_size % config.patch_size != 0)
    fail(ErrorKind::Shape, "image_size " + std::to_string(config.image_size) +
                               " not divisible by patch_size " +
                               std::to_string(config.patch_size));
  InputGeometry g;
  g.grid_rows = g.grid_cols =
      static_cast<std::size_t>(config.image_size / config.patch_size);
  g.patch_len = static_cast<std::size_t>(config.patch_size) *
                config.patch_size * config.channels;
  return g;
}

InputGeometry vector_geometry(const VisionConfig& config,
                              std::size_t feature_dim) {
  if (config.patch_size <= 0)
    fail(ErrorKind::Shape, "vision config: non-positive patch_size");
  const std::size_t chunk = static_cast<std::size_t>(config.patch_size);
  if (feature_dim == 0 || feature_dim % chunk != 0)
    fail(ErrorKind::Shape,
         "feature_dim " + std::to_string(feature_dim) +
             " not divisible by chunk length " + std::to_string(chunk));
  InputGeometry g;
  g.grid_rows = 1;
  g.grid_cols = feature_dim / chunk;
  g.patch_len = chunk;
  return g;
}

InputGeometry manifest_geometry(const VisionConfig& config,
                                const DatasetManifest& manifest) {
  const std::size_t dim = manifest.feature_dim();
  return dim > 0 ? vector_geometry(config, dim) : image_geometry(config);
}

void validate_vision_config(const VisionConfig& config,
                            const InputGeometry& geom) {
  if (config.embed_dim <= 0 || config.depth < 0 || config.heads <= 0 ||
      config.mlp_hidden <= 0 || config.head_hidden <= 0 || config.d_v <= 0)
    fail(ErrorKind::Shape, "vision config: non-positive dimension");
  if (config.embed_dim % config.heads != 0)
    fail(ErrorKind::Shape, "embed_dim not divisible by heads");
  const WindowPlan plan = plan_windows(config, geom);
  if (plan.windowed &&
      (geom.grid_rows % plan.tile_r != 0 || geom.grid_cols % plan.tile_c != 0))
    fail(ErrorKind::Shape, "window_size does not tile the patch grid");
}

PatchSequence patchify(const Image& image, int patch_size) {
  if (patch_size <= 0 || image.height % patch_size != 0 ||
      image.width % patch_size != 0)
    fail(ErrorKind::Shape,
         "patchify: image " + std::to_string(image.height) + "x" +
             std::to_string(image.width) + " not divisible by patch_size " +
             std::to_string(patch_size));
  if (!std::all_of(image.pixels.begin(), image.pixels.end(),
                   [](double v) { return std::isfinite(v); }))
    fail(ErrorKind::Numeric, "patchify: non-finite pixel values");
  const std::size_t ps = static_cast<std::size_t>(patch_size);
  PatchSequence seq;
  seq.grid_rows = image.height / ps;
  seq.grid_cols = image.width / ps;
  seq.patches = Matrix(seq.grid_rows * seq.grid_cols,
                       ps * ps * image.channels);
  for (std::size_t pr = 0; pr < seq.grid_rows; ++pr) {
    for (std::size_t pc = 0; pc < seq.grid_cols; ++pc) {
      double* dst = seq.patches.row(pr * seq.grid_cols + pc);
      std::size_t k = 0;
      for (std::size_t dy = 0; dy < ps; ++dy)
        for (std::size_t dx = 0; dx < ps; ++dx)
          for (std::size_t c = 0; c < image.channels; ++c)
            dst[k++] = image.at(pr * ps + dy, pc * ps + dx, c);
    }
  }
  return seq;
}

Image unpatchify(const PatchSequence& seq, int patch_size,
                 std::size_t channels) {
  const std::size_t ps = static_cast<std::size_t>(patch_size);
  Image img;
  img.height = seq.grid_rows * ps;
  img.width = seq.grid_cols * ps;
  img.channels = channels;
  img.pixels.resize(img.height * img.width * channels);
  for (std::size_t pr = 0; pr < seq.grid_rows; ++pr) {
    for (std::size_t pc = 0; pc < seq.grid_cols; ++pc) {
      const double* src = seq.patches.row(pr * seq.grid_cols + pc);
      std::size_t k = 0;
      for (std::size_t dy = 0; dy < ps; ++dy)
        for (std::size_t dx = 0; dx < ps; ++dx)
          for (std::size_t c = 0; c < channels; ++c)
            img.at(pr * ps + dy, pc * ps + dx, c) = src[k++];
    }
  }
  return img;
}

PatchSequence chunk_features(const std::vector<double>& features,
                             std::size_t chunk_len) {
  if (chunk_len == 0 || features.empty() || features.size() % chunk_len != 0)
    fail(ErrorKind::Shape, "chunk_features: length not divisible by chunk");
  PatchSequence seq;
  seq.grid_rows = 1;
  seq.grid_cols = features.size() / chunk_len;
  seq.patches = Matrix(seq.grid_cols, chunk_len);
  std::copy(features.begin(), features.end(), seq.patches.data.begin());
  return seq;
}

PatchSequence example_to_patches(const Example& e, const VisionConfig& config,
                                 const InputGeometry& geom) {
  if (e.has_vector()) {
    PatchSequence seq = chunk_features(e.features, geom.patch_len);
    if (seq.grid_cols != geom.grid_cols)
      fail(ErrorKind::Shape, "example " + e.example_id +
                                 ": feature length does not match geometry");
    return seq;
  }
  Image img = load_netpbm(e.image_path);
  img = convert_channels(img, static_cast<std::size_t>(config.channels));
  const std::size_t side = static_cast<std::size_t>(config.image_size);
  if (img.height != side || img.width != side)
    img = resize_bilinear(img, side, side);
  return patchify(img, config.patch_size);
}

std::vector<std::size_t> window_permutation(std::size_t rows,
                                            std::size_t cols,
                                            std::size_t tile_r,
                                            std::size_t tile_c,
                                            std::size_t shift_r,
                                            std::size_t shift_c) {
  if (tile_r == 0 || tile_c == 0 || rows % tile_r != 0 || cols % tile_c != 0)
    fail(ErrorKind::Shape, "window_permutation: tiles do not divide grid");
  std::vector<std::size_t> perm(rows * cols);
  const std::size_t wcols = cols / tile_c;
  for (std::size_t d = 0; d < perm.size(); ++d) {
    const std::size_t window = d / (tile_r * tile_c);
    const std::size_t inner = d % (tile_r * tile_c);
    const std::size_t wr = window / wcols, wc = window % wcols;
    const std::size_t ir = inner / tile_c, ic = inner % tile_c;
    const std::size_t shifted_r = wr * tile_r + ir;
    const std::size_t shifted_c = wc * tile_c + ic;
    const std::size_t src_r = (shifted_r + shift_r) % rows;
    const std::size_t src_c = (shifted_c + shift_c) % cols;
    perm[d] = src_r * cols + src_c;
  }
  return perm;
}

std::vector<std::size_t> invert_permutation(
    const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

ParamVars lift_params(ad::Tape& tape, const ParamTable& params) {
  ParamVars pv;
  for (const auto& [name, tensor] : params)
    pv.emplace(name, tape.leaf(tensor, name));
  return pv;
}

void init_vision_params(const VisionConfig& config, const InputGeometry& geom,
                        std::uint64_t seed, ParamTable& out) {
  validate_vision_config(config, geom);
  const std::size_t e = static_cast<std::size_t>(config.embed_dim);
  const std::size_t m = geom.patch_count();
  init_tensor(out, "vision.patch_proj.w", geom.patch_len, e, seed,
              geom.patch_len);
  init_tensor(out, "vision.patch_proj.b", 1, e, seed, 0);
  init_tensor(out, "vision.pos_emb", m, e, seed, 0);
  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "vision.layer" + std::to_string(l) + ".";
    init_ones(out, p + "ln1.g", e);
    init_tensor(out, p + "ln1.b", 1, e, seed, 0);
    for (const char* w : {"wq", "wk", "wv", "wo"})
      init_tensor(out, p + "attn." + w, e, e, seed, e);
    for (const char* b : {"bq", "bk", "bv", "bo"})
      init_tensor(out, p + "attn." + b, 1, e, seed, 0);
    init_ones(out, p + "ln2.g", e);
    init_tensor(out, p + "ln2.b", 1, e, seed, 0);
    const std::size_t h = static_cast<std::size_t>(config.mlp_hidden);
    init_tensor(out, p + "mlp.w1", e, h, seed, e);
    init_tensor(out, p + "mlp.b1", 1, h, seed, 0);
    init_tensor(out, p + "mlp.w2", h, e, seed, h);
    init_tensor(out, p + "mlp.b2", 1, e, seed, 0);
  }
  const std::size_t hh = static_cast<std::size_t>(config.head_hidden);
  init_tensor(out, "vision.head.w1", e, hh, seed, e);
  init_tensor(out, "vision.head.b1", 1, hh, seed, 0);
  init_tensor(out, "vision.head.w2", hh, static_cast<std::size_t>(config.d_v),
              seed, hh);
  init_tensor(out, "vision.head.b2", 1, static_cast<std::size_t>(config.d_v),
              seed, 0);
}

ad::Var build_patch_encoder(ad::Tape& tape, ad::Var patches,
                            const ParamVars& pv, const VisionConfig& config,
                            const InputGeometry& geom) {
  validate_vision_config(config, geom);
  const Matrix& in = tape.value(patches);
  if (in.rows != geom.patch_count() || in.cols != geom.patch_len)
    fail(ErrorKind::Shape, "encode_patches: input is " + shape_str(in) +
                               ", geometry wants " +
                               std::to_string(geom.patch_count()) + "x" +
                               std::to_string(geom.patch_len));
  const WindowPlan plan = plan_windows(config, geom);
  ad::Var x = tape.linear(patches, pv_at(pv, "vision.patch_proj.w"),
                          pv_at(pv, "vision.patch_proj.b"));
  x = tape.add(x, pv_at(pv, "vision.pos_emb"));
  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "vision.layer" + std::to_string(l) + ".";
    ad::Var h = tape.layernorm(x, pv_at(pv, p + "ln1.g"),
                               pv_at(pv, p + "ln1.b"));
    std::vector<std::size_t> perm, inv;
    std::size_t block = geom.patch_count();
    if (plan.windowed) {
      const bool shifted = config.shift_windows && (l % 2 == 1);
      perm = window_permutation(geom.grid_rows, geom.grid_cols, plan.tile_r,
                                plan.tile_c,
                                shifted ? plan.tile_r / 2 : 0,
                                shifted ? plan.tile_c / 2 : 0);
      inv = invert_permutation(perm);
      h = tape.permute_rows(h, perm);
      block = plan.tile_r * plan.tile_c;
    }
    ad::Var q = tape.linear(h, pv_at(pv, p + "attn.wq"),
                            pv_at(pv, p + "attn.bq"));
    ad::Var k = tape.linear(h, pv_at(pv, p + "attn.wk"),
                            pv_at(pv, p + "attn.bk"));
    ad::Var v = tape.linear(h, pv_at(pv, p + "attn.wv"),
                            pv_at(pv, p + "attn.bv"));
    ad::Var a = tape.block_attention(
        q, k, v, static_cast<std::size_t>(config.heads), block);
    a = tape.linear(a, pv_at(pv, p + "attn.wo"), pv_at(pv, p + "attn.bo"));
    if (plan.windowed) a = tape.permute_rows(a, inv);
    x = tape.add(x, a);
    ad::Var h2 = tape.layernorm(x, pv_at(pv, p + "ln2.g"),
                                pv_at(pv, p + "ln2.b"));
    ad::Var m1 = tape.gelu(tape.linear(h2, pv_at(pv, p + "mlp.w1"),
                                       pv_at(pv, p + "mlp.b1")));
    ad::Var m2 = tape.linear(m1, pv_at(pv, p + "mlp.w2"),
                             pv_at(pv, p + "mlp.b2"));
    x = tape.add(x, m2);
    if (!is_finite(tape.value(x)))
      fail(ErrorKind::Numeric, "vision.layer" + std::to_string(l) +
                                   ": non-finite activations");
  }
  return x;
}

ad::Var build_pool_project(ad::Tape& tape, ad::Var encoded,
                           const ParamVars& pv) {
  if (tape.value(encoded).rows == 0)
    fail(ErrorKind::Input, "pool_project: empty patch sequence");
  ad::Var pooled = tape.mean_rows(encoded);
  ad::Var h = tape.gelu(tape.linear(pooled, pv_at(pv, "vision.head.w1"),
                                    pv_at(pv, "vision.head.b1")));
  return tape.linear(h, pv_at(pv, "vision.head.w2"),
                     pv_at(pv, "vision.head.b2"));
}

Matrix encode_patches(const PatchSequence& seq, const ParamTable& params,
                      const VisionConfig& config) {
  InputGeometry geom;
  geom.grid_rows = seq.grid_rows;
  geom.grid_cols = seq.grid_cols;
  geom.patch_len = seq.patches.cols;
  ad::Tape tape;
  ParamVars pv = lift_params(tape, params);
  ad::Var out =
      build_patch_encoder(tape, tape.leaf(seq.patches), pv, config, geom);
  return tape.value(out);
}

Matrix pool_project(const Matrix& patch_embeddings, const ParamTable& params) {
  ad::Tape tape;
  ParamVars pv = lift_params(tape, params);
  ad::Var out = build_pool_project(tape, tape.leaf(patch_embeddings), pv);
  return tape.value(out);
}

EmbeddingBatch forward_visual(const std::vector<PatchSequence>& batch,
                              const std::vector<int>& labels,
                              const ParamTable& params,
                              const VisionConfig& config) {
  if (batch.empty()) fail(ErrorKind::Input, "forward_visual: empty batch");
  if (labels.size() != batch.size())
    fail(ErrorKind::Shape, "forward_visual: labels/batch size mismatch");
  for (const PatchSequence& seq : batch)
    if (seq.grid_rows != batch[0].grid_rows ||
        seq.grid_cols != batch[0].grid_cols ||
        seq.patches.cols != batch[0].patches.cols)
      fail(ErrorKind::Shape, "forward_visual: mixed patch shapes in batch");
  InputGeometry geom;
  geom.grid_rows = batch[0].grid_rows;
  geom.grid_cols = batch[0].grid_cols;
  geom.patch_len = batch[0].patches.cols;
  ad::Tape tape;
  ParamVars pv = lift_params(tape, params);
  std::vector<ad::Var> rows;
  rows.reserve(batch.size());
  for (const PatchSequence& seq : batch) {
    ad::Var enc = build_patch_encoder(tape, tape.leaf(seq.patches), pv,
                                      config, geom);
    rows.push_back(build_pool_project(tape, enc, pv));
  }
  EmbeddingBatch out;
  out.features = tape.value(tape.concat_rows(rows));
  out.labels = labels;
  return out;
}

}  // namespace svt
