#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svt/autodiff.hpp"
#include "svt/matrix.hpp"
#include "svt/params.hpp"
#include "svt/vision.hpp"

namespace svt {

struct TextConfig {
  int vocab_size = 256;
  int max_len = 8;
  int token_dim = 16;
  int depth = 1;
  int heads = 2;
  int d_s = 8;
  int projection_hidden = 0;  // 0 = single linear layer for f
  int d_v = 8;                // must equal the vision d_v
  int mlp_hidden = 0;         // 0 = 4 * token_dim
  bool freeze_encoder = false;  // train only the projection f

  int effective_mlp_hidden() const {
    return mlp_hidden > 0 ? mlp_hidden : 4 * token_dim;
  }
  // content ids are hash % vocab_size; the pad id sits one past them
  int pad_id() const { return vocab_size; }
};

constexpr const char* kDefaultPromptTemplate = "A photo of a {label}";

struct PromptEntry {
  int class_id = 0;
  std::string class_word;
  std::string sentence;
  std::vector<int> token_ids;
};
using PromptSet = std::vector<PromptEntry>;

// Substitutes the single "{label}" placeholder.
std::string render_prompt(const std::string& class_word,
                          const std::string& templ);

// ASCII-lowercase, split on whitespace, FNV-1a64 % vocab_size, pad/truncate
// to max_len. Stable across platforms.
std::vector<int> tokenize(const std::string& sentence,
                          const TextConfig& config);

PromptSet build_prompt_set(
    const std::vector<std::pair<int, std::string>>& classes,
    const std::string& templ, const TextConfig& config);

void validate_text_config(const TextConfig& config);

// Tensors under "text.": token/position embeddings, transformer blocks,
// pooling head (token_dim -> d_s) and the projection f (d_s -> d_v).
void init_text_params(const TextConfig& config, std::uint64_t seed,
                      ParamTable& out);

// Embedding lookup + positions -> transformer blocks -> mean over non-pad
// positions -> pooling head. Result (1, d_s).
ad::Var build_text_encoder(ad::Tape& tape, const std::vector<int>& token_ids,
                           const ParamVars& pv, const TextConfig& config);
// f: (1, d_s) -> (1, d_v)
ad::Var build_projection(ad::Tape& tape, ad::Var s, const ParamVars& pv,
                         const TextConfig& config);

Matrix encode_text(const std::vector<int>& token_ids,
                   const ParamTable& params, const TextConfig& config);
Matrix project_semantic(const Matrix& s, const ParamTable& params,
                        const TextConfig& config);

// True for the tensors SGD may update under this config (everything, or just
// f when the encoder is frozen).
bool text_param_trainable(const std::string& name, const TextConfig& config);

}  // namespace svt
