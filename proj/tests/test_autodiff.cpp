#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>

#include "doctest.h"
#include "svt/autodiff.hpp"
#include "svt/error.hpp"
#include "svt/rng.hpp"
#include "test_util.hpp"

using namespace svt;

namespace {

// numeric gradient of scalar(inputs...) wrt every entry of every input
using GraphFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

void check_op_gradients(const GraphFn& build, std::vector<Matrix> inputs,
                        double tol = 1e-6) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix& m : inputs) vars.push_back(tape.leaf(m));
  ad::Var root = build(tape, vars);
  REQUIRE(tape.value(root).rows == 1);
  REQUIRE(tape.value(root).cols == 1);
  tape.backward(root);

  const double step = 1e-6;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    const Matrix analytic = tape.grad(vars[which]);
    for (std::size_t idx = 0; idx < inputs[which].size(); ++idx) {
      auto eval = [&](double delta) {
        std::vector<Matrix> perturbed = inputs;
        perturbed[which].data[idx] += delta;
        ad::Tape t2;
        std::vector<ad::Var> vs;
        for (const Matrix& m : perturbed) vs.push_back(t2.leaf(m));
        return t2.value(build(t2, vs)).at(0, 0);
      };
      const double fd = (eval(step) - eval(-step)) / (2.0 * step);
      const double a = analytic.data[idx];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
      CHECK(std::abs(a - fd) / denom < tol);
    }
  }
}

// reduce any matrix to a scalar with fixed weights so gradients flow to
// every entry
ad::Var weighted_sum(ad::Tape& t, ad::Var x) {
  const Matrix& v = t.value(x);
  Matrix w(v.cols, 1);
  for (std::size_t i = 0; i < w.size(); ++i)
    w.data[i] = 0.3 + 0.1 * static_cast<double>(i);
  ad::Var wv = t.leaf(w);
  ad::Var col = t.matmul(x, wv);  // (rows,1)
  Matrix u(1, v.rows);
  for (std::size_t i = 0; i < u.size(); ++i)
    u.data[i] = 0.7 - 0.05 * static_cast<double>(i);
  return t.matmul(t.leaf(u), col);
}

}  // namespace

TEST_CASE("gradients: matmul and matmul_nt") {
  Rng rng(21);
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.matmul(v[0], v[1]));
      },
      {testutil::rand_matrix(3, 4, rng), testutil::rand_matrix(4, 2, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.matmul_nt(v[0], v[1]));
      },
      {testutil::rand_matrix(3, 4, rng), testutil::rand_matrix(5, 4, rng)});
}

TEST_CASE("gradients: add, add_rowvec, add_scaled, scale") {
  Rng rng(22);
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.add(v[0], v[1]));
      },
      {testutil::rand_matrix(3, 3, rng), testutil::rand_matrix(3, 3, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.add_rowvec(v[0], v[1]));
      },
      {testutil::rand_matrix(4, 3, rng), testutil::rand_matrix(1, 3, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.add_scaled(v[0], v[1], 1.7));
      },
      {testutil::rand_matrix(2, 3, rng), testutil::rand_matrix(2, 3, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.scale(v[0], -2.5));
      },
      {testutil::rand_matrix(2, 5, rng)});
}

TEST_CASE("gradients: gelu and layernorm") {
  Rng rng(23);
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.gelu(v[0]));
      },
      {testutil::rand_matrix(3, 4, rng, -2.0, 2.0)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.layernorm(v[0], v[1], v[2]));
      },
      {testutil::rand_matrix(3, 5, rng), testutil::rand_matrix(1, 5, rng, 0.5, 1.5),
       testutil::rand_matrix(1, 5, rng)},
      1e-5);
}

TEST_CASE("gradients: permute, gather, concat, means") {
  Rng rng(24);
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.permute_rows(v[0], {3, 1, 0, 2}));
      },
      {testutil::rand_matrix(4, 3, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.gather_rows(v[0], {2, 0, 2, 1}));
      },
      {testutil::rand_matrix(3, 3, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.concat_rows({v[0], v[1]}));
      },
      {testutil::rand_matrix(2, 3, rng), testutil::rand_matrix(3, 3, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.mean_rows(v[0]));
      },
      {testutil::rand_matrix(5, 3, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.mean_rows_subset(v[0], {0, 2, 3}));
      },
      {testutil::rand_matrix(5, 3, rng)});
}

TEST_CASE("gradients: block attention and cross entropy") {
  Rng rng(25);
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return weighted_sum(t, t.block_attention(v[0], v[1], v[2], 2, 2));
      },
      {testutil::rand_matrix(4, 4, rng), testutil::rand_matrix(4, 4, rng),
       testutil::rand_matrix(4, 4, rng)},
      1e-5);
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return t.cross_entropy_mean(v[0], {1, 0, 2});
      },
      {testutil::rand_matrix(3, 3, rng)});
  check_op_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return t.sum_squares(v[0]);
      },
      {testutil::rand_matrix(3, 2, rng)});
}

TEST_CASE("block attention forward matches the scalar oracle") {
  Rng rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t heads = 1 + rng.next_below(2);
    const std::size_t rows = 2 + rng.next_below(4);
    const std::size_t dh = 1 + rng.next_below(3);
    const std::size_t dim = heads * dh;
    const Matrix q = testutil::rand_matrix(rows, dim, rng);
    const Matrix k = testutil::rand_matrix(rows, dim, rng);
    const Matrix v = testutil::rand_matrix(rows, dim, rng);
    ad::Tape tape;
    ad::Var out = tape.block_attention(tape.leaf(q), tape.leaf(k),
                                       tape.leaf(v), heads, rows);
    const auto expected = testutil::o_attention(
        testutil::to_grid(q), testutil::to_grid(k), testutil::to_grid(v),
        heads);
    CHECK(testutil::max_abs_diff(tape.value(out), expected) < 1e-6);
  }
}

TEST_CASE("mean_rows is exactly invariant to row permutations") {
  Rng rng(27);
  const Matrix x = testutil::rand_matrix(7, 4, rng);
  ad::Tape t1;
  const Matrix base = t1.value(t1.mean_rows(t1.leaf(x)));
  std::vector<std::size_t> perm{6, 2, 0, 5, 1, 4, 3};
  Matrix shuffled(7, 4);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      shuffled.at(i, j) = x.at(perm[i], j);
  ad::Tape t2;
  const Matrix permuted = t2.value(t2.mean_rows(t2.leaf(shuffled)));
  CHECK(base == permuted);
}

TEST_CASE("cross_entropy_mean rejects bad labels and non-finite logits") {
  ad::Tape tape;
  Rng rng(28);
  ad::Var logits = tape.leaf(testutil::rand_matrix(2, 3, rng));
  CHECK_THROWS_AS(tape.cross_entropy_mean(logits, {0, 3}), Error);
  Matrix bad(1, 3);
  bad.at(0, 1) = std::nan("");
  ad::Var nanlogits = tape.leaf(bad);
  CHECK_THROWS_AS(tape.cross_entropy_mean(nanlogits, {0}), Error);
}

TEST_CASE("permute_rows validates the permutation") {
  ad::Tape tape;
  Rng rng(29);
  ad::Var x = tape.leaf(testutil::rand_matrix(3, 2, rng));
  CHECK_THROWS_AS(tape.permute_rows(x, {0, 0, 1}), Error);
  CHECK_THROWS_AS(tape.permute_rows(x, {0, 1}), Error);
}

TEST_CASE("backward requires a scalar root") {
  ad::Tape tape;
  Rng rng(30);
  ad::Var x = tape.leaf(testutil::rand_matrix(2, 2, rng));
  CHECK_THROWS_AS(tape.backward(x), Error);
}
