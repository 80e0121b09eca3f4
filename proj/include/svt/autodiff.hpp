#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "svt/matrix.hpp"

namespace svt::ad {

// Reverse-mode tape over Matrix values. One tape per forward pass; node ids
// index into the tape, so creation order is the topological order and the
// backward sweep is a single reverse walk. All reductions that feed means use
// order-canonical summation (see stable_sum) so permutation invariants hold
// bit-exactly.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  Var leaf(Matrix value, std::string name = "");

  const Matrix& value(Var v) const { return nodes_[check(v)].value; }
  const Matrix& grad(Var v) const { return nodes_[check(v)].grad; }
  const std::string& name(Var v) const { return nodes_[check(v)].name; }
  std::size_t node_count() const { return nodes_.size(); }

  Var matmul(Var a, Var b);     // A·B
  Var matmul_nt(Var a, Var b);  // A·Bᵀ
  Var add(Var a, Var b);
  Var add_rowvec(Var a, Var bias);       // (M,N) + (1,N), broadcast over rows
  Var add_scaled(Var a, Var b, double c);  // a + c·b
  Var scale(Var a, double c);
  Var gelu(Var a);
  Var layernorm(Var x, Var gain, Var bias, double eps = 1e-5);
  Var permute_rows(Var a, const std::vector<std::size_t>& perm);
  Var gather_rows(Var a, const std::vector<std::size_t>& ids);
  Var concat_rows(const std::vector<Var>& parts);
  Var mean_rows(Var a);  // (M,N) -> (1,N)
  Var mean_rows_subset(Var a, const std::vector<std::size_t>& idx);
  // Multi-head softmax attention within consecutive row blocks of size
  // block_size. q,k,v: (M,D); D divisible by heads; M divisible by block_size.
  Var block_attention(Var q, Var k, Var v, std::size_t heads,
                      std::size_t block_size);
  // Mean negative log-likelihood over rows; logits (T,C), one label per row.
  Var cross_entropy_mean(Var logits, const std::vector<int>& labels);
  Var sum_squares(Var a);

  // Convenience: x·W + b with W (in,out) and b (1,out).
  Var linear(Var x, Var w, Var b);

  void backward(Var scalar_root);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::string name;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  int check(Var v) const;
  Var push(Matrix value, std::function<void(Tape&)> back,
           std::string name = "");
  Matrix& grad_mut(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Matrix& val(int id) const {
    return nodes_[static_cast<std::size_t>(id)].value;
  }

  std::vector<Node> nodes_;
  int cursor_ = -1;  // node whose backward fn is currently running
};

}  // namespace svt::ad
