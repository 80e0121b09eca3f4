#include "svt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "svt/error.hpp"
#include "svt/kernels.hpp"

namespace svt::ad {

namespace {

void add_into(Matrix& acc, const Matrix& d) {
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += d.data[i];
}

double gelu_fwd(double x) {
  return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

int Tape::check(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
    fail(ErrorKind::Shape, "autodiff: invalid node handle");
  return v.id;
}

Var Tape::push(Matrix value, std::function<void(Tape&)> back,
               std::string name) {
  nodes_.push_back(Node{std::move(value), Matrix{}, std::move(name),
                        std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value, std::string name) {
  return push(std::move(value), {}, std::move(name));
}

Var Tape::matmul(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  Matrix out = kernels::matmul(val(ia), val(ib));
  return push(std::move(out), [ia, ib](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    add_into(t.grad_mut(ia), kernels::matmul_nt(g, t.val(ib)));
    add_into(t.grad_mut(ib), kernels::matmul_tn(t.val(ia), g));
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  Matrix out = kernels::matmul_nt(val(ia), val(ib));
  return push(std::move(out), [ia, ib](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    add_into(t.grad_mut(ia), kernels::matmul(g, t.val(ib)));
    add_into(t.grad_mut(ib), kernels::matmul_tn(g, t.val(ia)));
  });
}

Var Tape::add(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  if (!val(ia).same_shape(val(ib)))
    fail(ErrorKind::Shape, "add: " + shape_str(val(ia)) + " vs " +
                               shape_str(val(ib)));
  Matrix out = val(ia);
  add_into(out, val(ib));
  return push(std::move(out), [ia, ib](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    add_into(t.grad_mut(ia), g);
    add_into(t.grad_mut(ib), g);
  });
}

Var Tape::add_rowvec(Var a, Var bias) {
  const int ia = check(a), ib = check(bias);
  const Matrix& x = val(ia);
  const Matrix& v = val(ib);
  if (v.rows != 1 || v.cols != x.cols)
    fail(ErrorKind::Shape, "add_rowvec: " + shape_str(x) + " + " +
                               shape_str(v));
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out.at(i, j) += v.at(0, j);
  return push(std::move(out), [ia, ib](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    add_into(t.grad_mut(ia), g);
    Matrix& gv = t.grad_mut(ib);
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t j = 0; j < g.cols; ++j) gv.at(0, j) += g.at(i, j);
  });
}

Var Tape::add_scaled(Var a, Var b, double c) {
  const int ia = check(a), ib = check(b);
  if (!val(ia).same_shape(val(ib)))
    fail(ErrorKind::Shape, "add_scaled: shape mismatch");
  Matrix out = val(ia);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] += c * val(ib).data[i];
  return push(std::move(out), [ia, ib, c](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    add_into(t.grad_mut(ia), g);
    Matrix& gb = t.grad_mut(ib);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      gb.data[i] += c * g.data[i];
  });
}

Var Tape::scale(Var a, double c) {
  const int ia = check(a);
  Matrix out = val(ia);
  for (auto& x : out.data) x *= c;
  return push(std::move(out), [ia, c](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      ga.data[i] += c * g.data[i];
  });
}

Var Tape::gelu(Var a) {
  const int ia = check(a);
  Matrix out = val(ia);
  for (auto& x : out.data) x = gelu_fwd(x);
  return push(std::move(out), [ia](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    const Matrix& x = t.val(ia);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      ga.data[i] += g.data[i] * gelu_grad(x.data[i]);
  });
}

Var Tape::layernorm(Var x, Var gain, Var bias, double eps) {
  const int ix = check(x), ig = check(gain), ib = check(bias);
  const Matrix& in = val(ix);
  const std::size_t n = in.cols;
  if (val(ig).rows != 1 || val(ig).cols != n || val(ib).rows != 1 ||
      val(ib).cols != n)
    fail(ErrorKind::Shape, "layernorm: gain/bias must be 1x" +
                               std::to_string(n));
  Matrix xhat(in.rows, n);
  std::vector<double> inv_sigma(in.rows);
  Matrix out(in.rows, n);
  for (std::size_t i = 0; i < in.rows; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in.at(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = in.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      xhat.at(i, j) = (in.at(i, j) - mu) * is;
      out.at(i, j) = xhat.at(i, j) * val(ig).at(0, j) + val(ib).at(0, j);
    }
  }
  return push(std::move(out),
              [ix, ig, ib, xh = std::move(xhat),
               is = std::move(inv_sigma)](Tape& t) {
                const Matrix& g = t.grad_mut(t.cursor_);
                const std::size_t n = g.cols;
                Matrix& gx = t.grad_mut(ix);
                Matrix& gg = t.grad_mut(ig);
                Matrix& gb = t.grad_mut(ib);
                const Matrix& gain = t.val(ig);
                for (std::size_t i = 0; i < g.rows; ++i) {
                  double m_dxhat = 0.0, m_dxhat_xhat = 0.0;
                  for (std::size_t j = 0; j < n; ++j) {
                    const double dxh = g.at(i, j) * gain.at(0, j);
                    m_dxhat += dxh;
                    m_dxhat_xhat += dxh * xh.at(i, j);
                    gg.at(0, j) += g.at(i, j) * xh.at(i, j);
                    gb.at(0, j) += g.at(i, j);
                  }
                  m_dxhat /= static_cast<double>(n);
                  m_dxhat_xhat /= static_cast<double>(n);
                  for (std::size_t j = 0; j < n; ++j) {
                    const double dxh = g.at(i, j) * gain.at(0, j);
                    gx.at(i, j) += is[i] * (dxh - m_dxhat -
                                            xh.at(i, j) * m_dxhat_xhat);
                  }
                }
              });
}

Var Tape::permute_rows(Var a, const std::vector<std::size_t>& perm) {
  const int ia = check(a);
  const Matrix& x = val(ia);
  if (perm.size() != x.rows)
    fail(ErrorKind::Shape, "permute_rows: size mismatch");
  std::vector<bool> seen(x.rows, false);
  for (std::size_t p : perm) {
    if (p >= x.rows || seen[p])
      fail(ErrorKind::Shape, "permute_rows: not a permutation");
    seen[p] = true;
  }
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    std::copy_n(x.row(perm[i]), x.cols, out.row(i));
  return push(std::move(out), [ia, perm](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double* dst = ga.row(perm[i]);
      const double* src = g.row(i);
      for (std::size_t j = 0; j < g.cols; ++j) dst[j] += src[j];
    }
  });
}

Var Tape::gather_rows(Var a, const std::vector<std::size_t>& ids) {
  const int ia = check(a);
  const Matrix& x = val(ia);
  for (std::size_t id : ids)
    if (id >= x.rows) fail(ErrorKind::Shape, "gather_rows: row out of range");
  Matrix out(ids.size(), x.cols);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(x.row(ids[i]), x.cols, out.row(i));
  return push(std::move(out), [ia, ids](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      double* dst = ga.row(ids[i]);
      const double* src = g.row(i);
      for (std::size_t j = 0; j < g.cols; ++j) dst[j] += src[j];
    }
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorKind::Input, "concat_rows: no parts");
  std::vector<int> ids;
  std::size_t rows = 0;
  const std::size_t cols = val(check(parts[0])).cols;
  for (Var p : parts) {
    const int ip = check(p);
    if (val(ip).cols != cols) fail(ErrorKind::Shape, "concat_rows: col mismatch");
    rows += val(ip).rows;
    ids.push_back(ip);
  }
  Matrix out(rows, cols);
  std::size_t r = 0;
  for (int ip : ids) {
    std::copy_n(val(ip).data.data(), val(ip).size(), out.row(r));
    r += val(ip).rows;
  }
  return push(std::move(out), [ids](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    std::size_t r = 0;
    for (int ip : ids) {
      Matrix& gp = t.grad_mut(ip);
      for (std::size_t i = 0; i < gp.rows; ++i) {
        const double* src = g.row(r + i);
        double* dst = gp.row(i);
        for (std::size_t j = 0; j < g.cols; ++j) dst[j] += src[j];
      }
      r += gp.rows;
    }
  });
}

namespace {
Matrix subset_mean(const Matrix& x, const std::vector<std::size_t>& idx) {
  Matrix out(1, x.cols);
  std::vector<double> col(idx.size());
  for (std::size_t j = 0; j < x.cols; ++j) {
    for (std::size_t i = 0; i < idx.size(); ++i) col[i] = x.at(idx[i], j);
    out.at(0, j) = stable_sum(col) / static_cast<double>(idx.size());
  }
  return out;
}
}  // namespace

Var Tape::mean_rows(Var a) {
  const int ia = check(a);
  const Matrix& x = val(ia);
  if (x.rows == 0) fail(ErrorKind::Input, "mean_rows: empty input");
  std::vector<std::size_t> all(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) all[i] = i;
  Matrix out = subset_mean(x, all);
  return push(std::move(out), [ia, m = x.rows](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    Matrix& ga = t.grad_mut(ia);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < g.cols; ++j)
        ga.at(i, j) += g.at(0, j) * inv;
  });
}

Var Tape::mean_rows_subset(Var a, const std::vector<std::size_t>& idx) {
  const int ia = check(a);
  const Matrix& x = val(ia);
  if (idx.empty()) fail(ErrorKind::Input, "mean_rows_subset: empty index set");
  for (std::size_t i : idx)
    if (i >= x.rows) fail(ErrorKind::Shape, "mean_rows_subset: out of range");
  Matrix out = subset_mean(x, idx);
  return push(std::move(out), [ia, idx](Tape& t) {
    const Matrix& g = t.grad_mut(t.cursor_);
    Matrix& ga = t.grad_mut(ia);
    const double inv = 1.0 / static_cast<double>(idx.size());
    for (std::size_t i : idx)
      for (std::size_t j = 0; j < g.cols; ++j)
        ga.at(i, j) += g.at(0, j) * inv;
  });
}

Var Tape::block_attention(Var q, Var k, Var v, std::size_t heads,
                          std::size_t block_size) {
  const int iq = check(q), ik = check(k), iv = check(v);
  const Matrix& Q = val(iq);
  if (!Q.same_shape(val(ik)) || !Q.same_shape(val(iv)))
    fail(ErrorKind::Shape, "block_attention: q/k/v shapes differ");
  if (heads == 0 || Q.cols % heads != 0)
    fail(ErrorKind::Shape, "block_attention: dim not divisible by heads");
  if (block_size == 0 || Q.rows % block_size != 0)
    fail(ErrorKind::Shape, "block_attention: rows not divisible by block");
  const std::size_t dh = Q.cols / heads;
  const std::size_t nblocks = Q.rows / block_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  auto slice = [dh, block_size](const Matrix& m, std::size_t b,
                                std::size_t h) {
    Matrix s(block_size, dh);
    for (std::size_t i = 0; i < block_size; ++i)
      std::copy_n(m.row(b * block_size + i) + h * dh, dh, s.row(i));
    return s;
  };

  Matrix out(Q.rows, Q.cols);
  std::vector<Matrix> probs(nblocks * heads);
  for (std::size_t b = 0; b < nblocks; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      Matrix qs = slice(Q, b, h), ks = slice(val(ik), b, h),
             vs = slice(val(iv), b, h);
      Matrix scores = kernels::matmul_nt(qs, ks);
      for (auto& x : scores.data) x *= scale;
      Matrix p = kernels::row_softmax(scores);
      Matrix o = kernels::matmul(p, vs);
      for (std::size_t i = 0; i < block_size; ++i)
        std::copy_n(o.row(i), dh, out.row(b * block_size + i) + h * dh);
      probs[b * heads + h] = std::move(p);
    }
  }
  return push(
      std::move(out),
      [iq, ik, iv, heads, block_size, dh, nblocks, scale, slice,
       probs = std::move(probs)](Tape& t) {
        const Matrix& g = t.grad_mut(t.cursor_);
        Matrix& gq = t.grad_mut(iq);
        Matrix& gk = t.grad_mut(ik);
        Matrix& gv = t.grad_mut(iv);
        for (std::size_t b = 0; b < nblocks; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const Matrix& p = probs[b * heads + h];
            Matrix qs = slice(t.val(iq), b, h), ks = slice(t.val(ik), b, h),
                   vs = slice(t.val(iv), b, h), go = slice(g, b, h);
            Matrix dv = kernels::matmul_tn(p, go);
            Matrix dp = kernels::matmul_nt(go, vs);
            // softmax backward, rowwise
            Matrix ds(block_size, block_size);
            for (std::size_t i = 0; i < block_size; ++i) {
              double dot = 0.0;
              for (std::size_t j = 0; j < block_size; ++j)
                dot += dp.at(i, j) * p.at(i, j);
              for (std::size_t j = 0; j < block_size; ++j)
                ds.at(i, j) = p.at(i, j) * (dp.at(i, j) - dot) * scale;
            }
            Matrix dq = kernels::matmul(ds, ks);
            Matrix dk = kernels::matmul_tn(ds, qs);
            for (std::size_t i = 0; i < block_size; ++i) {
              const std::size_t r = b * block_size + i;
              for (std::size_t j = 0; j < dh; ++j) {
                gq.at(r, h * dh + j) += dq.at(i, j);
                gk.at(r, h * dh + j) += dk.at(i, j);
                gv.at(r, h * dh + j) += dv.at(i, j);
              }
            }
          }
        }
      });
}

Var Tape::cross_entropy_mean(Var logits, const std::vector<int>& labels) {
  const int il = check(logits);
  const Matrix& z = val(il);
  if (z.rows == 0 || z.rows != labels.size())
    fail(ErrorKind::Shape, "cross_entropy_mean: logits/labels mismatch");
  if (z.cols < 2)
    fail(ErrorKind::Shape, "cross_entropy_mean: need at least 2 classes");
  if (!is_finite(z))
    fail(ErrorKind::Numeric, "cross_entropy_mean: non-finite logits");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= z.cols)
      fail(ErrorKind::Label,
           "cross_entropy_mean: label " + std::to_string(y) + " outside [0," +
               std::to_string(z.cols) + ")");
  Matrix probs = kernels::row_softmax(z);
  std::vector<double> nll(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) {
    // recompute the stabilized log-sum-exp directly for the loss value
    const double* zi = z.row(i);
    double mx = zi[0];
    for (std::size_t j = 1; j < z.cols; ++j) mx = std::max(mx, zi[j]);
    double lse = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) lse += std::exp(zi[j] - mx);
    nll[i] = std::log(lse) + mx - zi[static_cast<std::size_t>(labels[i])];
  }
  Matrix out(1, 1);
  out.at(0, 0) = stable_sum(nll) / static_cast<double>(z.rows);
  return push(std::move(out),
              [il, labels, p = std::move(probs)](Tape& t) {
                const double g = t.grad_mut(t.cursor_).at(0, 0);
                Matrix& gl = t.grad_mut(il);
                const double inv = g / static_cast<double>(p.rows);
                for (std::size_t i = 0; i < p.rows; ++i)
                  for (std::size_t j = 0; j < p.cols; ++j)
                    gl.at(i, j) +=
                        inv * (p.at(i, j) -
                               (j == static_cast<std::size_t>(labels[i])
                                    ? 1.0
                                    : 0.0));
              });
}

Var Tape::sum_squares(Var a) {
  const int ia = check(a);
  const Matrix& x = val(ia);
  Matrix out(1, 1);
  double acc = 0.0;
  for (double v : x.data) acc += v * v;
  out.at(0, 0) = acc;
  return push(std::move(out), [ia](Tape& t) {
    const double g = t.grad_mut(t.cursor_).at(0, 0);
    const Matrix& x = t.val(ia);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      ga.data[i] += 2.0 * x.data[i] * g;
  });
}

Var Tape::linear(Var x, Var w, Var b) {
  return add_rowvec(matmul(x, w), b);
}

void Tape::backward(Var scalar_root) {
  const int root = check(scalar_root);
  const Matrix& r = val(root);
  if (r.rows != 1 || r.cols != 1)
    fail(ErrorKind::Shape, "backward: root must be a 1x1 scalar");
  for (std::size_t i = 0; i <= static_cast<std::size_t>(root); ++i)
    nodes_[i].grad = Matrix::zeros(nodes_[i].value.rows, nodes_[i].value.cols);
  nodes_[static_cast<std::size_t>(root)].grad.at(0, 0) = 1.0;
  for (int i = root; i >= 0; --i) {
    if (nodes_[static_cast<std::size_t>(i)].back) {
      cursor_ = i;
      nodes_[static_cast<std::size_t>(i)].back(*this);
    }
  }
}

}  // namespace svt::ad
