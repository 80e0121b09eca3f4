#include "svt/text.hpp"

#include <algorithm>
#include <cmath>

#include "svt/error.hpp"
#include "svt/rng.hpp"

namespace svt {

namespace {

constexpr const char* kPlaceholder = "{label}";

void init_tensor(ParamTable& out, const std::string& name, std::size_t rows,
                 std::size_t cols, std::uint64_t seed, std::size_t fan_in) {
  if (fan_in == 0) {
    out.emplace(name, Matrix::zeros(rows, cols));
    return;
  }
  Rng rng = derive_rng(seed, "init", fnv1a64(name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  out.emplace(name, Matrix::uniform(rows, cols, -bound, bound, rng));
}

ad::Var pv_at(const ParamVars& pv, const std::string& name) {
  auto it = pv.find(name);
  if (it == pv.end())
    fail(ErrorKind::Shape, "missing parameter tensor: " + name);
  return it->second;
}

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace

std::string render_prompt(const std::string& class_word,
                          const std::string& templ) {
  if (class_word.empty())
    fail(ErrorKind::Config, "render_prompt: empty class word");
  const std::size_t pos = templ.find(kPlaceholder);
  if (pos == std::string::npos)
    fail(ErrorKind::Config,
         "prompt template has no {label} placeholder: " + templ);
  if (templ.find(kPlaceholder, pos + 1) != std::string::npos)
    fail(ErrorKind::Config,
         "prompt template has multiple {label} placeholders: " + templ);
  std::string out = templ;
  out.replace(pos, std::string(kPlaceholder).size(), class_word);
  return out;
}

std::vector<int> tokenize(const std::string& sentence,
                          const TextConfig& config) {
  const std::string lowered = ascii_lower(sentence);
  std::vector<int> ids;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      ids.push_back(static_cast<int>(
          fnv1a64(token) % static_cast<std::uint64_t>(config.vocab_size)));
      token.clear();
    }
  };
  for (char c : lowered) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  ids.resize(static_cast<std::size_t>(config.max_len), config.pad_id());
  return ids;
}

PromptSet build_prompt_set(
    const std::vector<std::pair<int, std::string>>& classes,
    const std::string& templ, const TextConfig& config) {
  PromptSet out;
  out.reserve(classes.size());
  for (const auto& [cid, word] : classes) {
    PromptEntry e;
    e.class_id = cid;
    e.class_word = word;
    e.sentence = render_prompt(word, templ);
    e.token_ids = tokenize(e.sentence, config);
    out.push_back(std::move(e));
  }
  return out;
}

void validate_text_config(const TextConfig& config) {
  if (config.vocab_size < 2 || config.max_len < 1 || config.token_dim < 1 ||
      config.depth < 0 || config.heads < 1 || config.d_s < 1 ||
      config.d_v < 1 || config.projection_hidden < 0)
    fail(ErrorKind::Shape, "text config: non-positive dimension");
  if (config.token_dim % config.heads != 0)
    fail(ErrorKind::Shape, "token_dim not divisible by heads");
}

void init_text_params(const TextConfig& config, std::uint64_t seed,
                      ParamTable& out) {
  validate_text_config(config);
  const std::size_t d = static_cast<std::size_t>(config.token_dim);
  init_tensor(out, "text.tok_emb",
              static_cast<std::size_t>(config.vocab_size) + 1, d, seed, d);
  init_tensor(out, "text.pos_emb", static_cast<std::size_t>(config.max_len),
              d, seed, 0);
  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "text.layer" + std::to_string(l) + ".";
    out.emplace(p + "ln1.g", Matrix::full(1, d, 1.0));
    init_tensor(out, p + "ln1.b", 1, d, seed, 0);
    for (const char* w : {"wq", "wk", "wv", "wo"})
      init_tensor(out, p + "attn." + std::string(w), d, d, seed, d);
    for (const char* b : {"bq", "bk", "bv", "bo"})
      init_tensor(out, p + "attn." + std::string(b), 1, d, seed, 0);
    out.emplace(p + "ln2.g", Matrix::full(1, d, 1.0));
    init_tensor(out, p + "ln2.b", 1, d, seed, 0);
    const std::size_t h =
        static_cast<std::size_t>(config.effective_mlp_hidden());
    init_tensor(out, p + "mlp.w1", d, h, seed, d);
    init_tensor(out, p + "mlp.b1", 1, h, seed, 0);
    init_tensor(out, p + "mlp.w2", h, d, seed, h);
    init_tensor(out, p + "mlp.b2", 1, d, seed, 0);
  }
  const std::size_t ds = static_cast<std::size_t>(config.d_s);
  init_tensor(out, "text.pool.w", d, ds, seed, d);
  init_tensor(out, "text.pool.b", 1, ds, seed, 0);
  const std::size_t dv = static_cast<std::size_t>(config.d_v);
  if (config.projection_hidden > 0) {
    const std::size_t ph = static_cast<std::size_t>(config.projection_hidden);
    init_tensor(out, "text.f.w1", ds, ph, seed, ds);
    init_tensor(out, "text.f.b1", 1, ph, seed, 0);
    init_tensor(out, "text.f.w2", ph, dv, seed, ph);
    init_tensor(out, "text.f.b2", 1, dv, seed, 0);
  } else {
    init_tensor(out, "text.f.w", ds, dv, seed, ds);
    init_tensor(out, "text.f.b", 1, dv, seed, 0);
  }
}

ad::Var build_text_encoder(ad::Tape& tape, const std::vector<int>& token_ids,
                           const ParamVars& pv, const TextConfig& config) {
  validate_text_config(config);
  if (token_ids.size() != static_cast<std::size_t>(config.max_len))
    fail(ErrorKind::Shape, "encode_text: sequence length " +
                               std::to_string(token_ids.size()) +
                               " != max_len " +
                               std::to_string(config.max_len));
  std::vector<std::size_t> rows;
  std::vector<std::size_t> non_pad;
  rows.reserve(token_ids.size());
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    const int id = token_ids[i];
    if (id < 0 || id > config.pad_id())
      fail(ErrorKind::Vocab, "token id " + std::to_string(id) +
                                 " outside vocabulary [0," +
                                 std::to_string(config.pad_id()) + "]");
    rows.push_back(static_cast<std::size_t>(id));
    if (id != config.pad_id()) non_pad.push_back(i);
  }
  if (non_pad.empty())
    fail(ErrorKind::Input, "encode_text: all-pad sequence, nothing to pool");

  ad::Var x = tape.gather_rows(pv_at(pv, "text.tok_emb"), rows);
  x = tape.add(x, pv_at(pv, "text.pos_emb"));
  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "text.layer" + std::to_string(l) + ".";
    ad::Var h = tape.layernorm(x, pv_at(pv, p + "ln1.g"),
                               pv_at(pv, p + "ln1.b"));
    ad::Var q = tape.linear(h, pv_at(pv, p + "attn.wq"),
                            pv_at(pv, p + "attn.bq"));
    ad::Var k = tape.linear(h, pv_at(pv, p + "attn.wk"),
                            pv_at(pv, p + "attn.bk"));
    ad::Var v = tape.linear(h, pv_at(pv, p + "attn.wv"),
                            pv_at(pv, p + "attn.bv"));
    ad::Var a = tape.block_attention(q, k, v,
                                     static_cast<std::size_t>(config.heads),
                                     static_cast<std::size_t>(config.max_len));
    a = tape.linear(a, pv_at(pv, p + "attn.wo"), pv_at(pv, p + "attn.bo"));
    x = tape.add(x, a);
    ad::Var h2 = tape.layernorm(x, pv_at(pv, p + "ln2.g"),
                                pv_at(pv, p + "ln2.b"));
    ad::Var m1 = tape.gelu(tape.linear(h2, pv_at(pv, p + "mlp.w1"),
                                       pv_at(pv, p + "mlp.b1")));
    x = tape.add(x, tape.linear(m1, pv_at(pv, p + "mlp.w2"),
                                pv_at(pv, p + "mlp.b2")));
    if (!is_finite(tape.value(x)))
      fail(ErrorKind::Numeric, "text.layer" + std::to_string(l) +
                                   ": non-finite activations");
  }
  ad::Var pooled = tape.mean_rows_subset(x, non_pad);
  return tape.linear(pooled, pv_at(pv, "text.pool.w"),
                     pv_at(pv, "text.pool.b"));
}

ad::Var build_projection(ad::Tape& tape, ad::Var s, const ParamVars& pv,
                         const TextConfig& config) {
  const Matrix& in = tape.value(s);
  if (in.cols != static_cast<std::size_t>(config.d_s))
    fail(ErrorKind::Shape, "project_semantic: input is " + shape_str(in) +
                               ", expected cols " +
                               std::to_string(config.d_s));
  if (config.projection_hidden > 0) {
    ad::Var h = tape.gelu(tape.linear(s, pv_at(pv, "text.f.w1"),
                                      pv_at(pv, "text.f.b1")));
    return tape.linear(h, pv_at(pv, "text.f.w2"), pv_at(pv, "text.f.b2"));
  }
  return tape.linear(s, pv_at(pv, "text.f.w"), pv_at(pv, "text.f.b"));
}

Matrix encode_text(const std::vector<int>& token_ids,
                   const ParamTable& params, const TextConfig& config) {
  ad::Tape tape;
  ParamVars pv = lift_params(tape, params);
  return tape.value(build_text_encoder(tape, token_ids, pv, config));
}

Matrix project_semantic(const Matrix& s, const ParamTable& params,
                        const TextConfig& config) {
  ad::Tape tape;
  ParamVars pv = lift_params(tape, params);
  return tape.value(build_projection(tape, tape.leaf(s), pv, config));
}

bool text_param_trainable(const std::string& name, const TextConfig& config) {
  if (!name.starts_with("text.")) return false;
  if (!config.freeze_encoder) return true;
  return name.starts_with("text.f.");
}

}  // namespace svt
