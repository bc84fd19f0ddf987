#include "satformer/autodiff.hpp"
#include "satformer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace satformer::ad {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                   b.shape_str());
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a) {
  throw ShapeError(std::string(op) + ": invalid shape " + a.shape_str());
}

// C += A * B
void mm_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int r = a.rows, k = a.cols, n = b.cols;
  for (int i = 0; i < r; ++i) {
    const double* ai = a.row_ptr(i);
    double* ci = c.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b.row_ptr(p);
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C += A * B^T
void mm_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int r = a.rows, k = a.cols, n = b.rows;
  for (int i = 0; i < r; ++i) {
    const double* ai = a.row_ptr(i);
    double* ci = c.row_ptr(i);
    for (int j = 0; j < n; ++j) {
      const double* bj = b.row_ptr(j);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C += A^T * B
void mm_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int k = a.rows, r = a.cols, n = b.cols;
  for (int p = 0; p < k; ++p) {
    const double* ap = a.row_ptr(p);
    const double* bp = b.row_ptr(p);
    for (int i = 0; i < r; ++i) {
      const double api = ap[i];
      if (api == 0.0) continue;
      double* ci = c.row_ptr(i);
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

bool same_shape(const Tensor& a, const Tensor& b) {
  return a.rows == b.rows && a.cols == b.cols;
}

// Broadcast mode for binary elementwise ops: exact shape, or 1xC over rows.
enum class Bcast { Same, RowVec };

Bcast bcast_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (same_shape(a, b)) return Bcast::Same;
  if (b.rows == 1 && b.cols == a.cols) return Bcast::RowVec;
  shape_fail(op, a, b);
}

void add_colsum(const Tensor& g, Tensor& out) {  // out (1xC) += column sums of g
  for (int i = 0; i < g.rows; ++i) {
    const double* gi = g.row_ptr(i);
    for (int j = 0; j < g.cols; ++j) out.data[size_t(j)] += gi[j];
  }
}

Val unary_map(Val x, double (*fwd)(double), double (*dfdy)(double, double), const char*) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  Tensor out(in.rows, in.cols);
  for (size_t i = 0; i < in.data.size(); ++i) out.data[i] = fwd(in.data[i]);
  return t.push(std::move(out), [xi = x.id, dfdy](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& xin = t.value(xi);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_ref(xi);
    for (size_t i = 0; i < xin.data.size(); ++i) {
      gx.data[i] += g.data[i] * dfdy(xin.data[i], y.data[i]);
    }
  });
}

}  // namespace

std::string Tensor::shape_str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows_in) {
  Tensor t(int(rows_in.size()), rows_in.empty() ? 0 : int(rows_in[0].size()));
  for (int i = 0; i < t.rows; ++i) {
    if (int(rows_in[size_t(i)].size()) != t.cols) {
      throw ShapeError("from_rows: ragged rows");
    }
    std::copy(rows_in[size_t(i)].begin(), rows_in[size_t(i)].end(), t.row_ptr(i));
  }
  return t;
}

Tensor Tensor::randn(int r, int c, double stddev, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data) v = stddev * rng.next_normal();
  return t;
}

Val Tape::input(Tensor value) { return push(std::move(value), nullptr); }

Val Tape::push(Tensor value, std::function<void(Tape&, int)> back) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
  return Val{this, int(nodes_.size()) - 1};
}

void Tape::backward(Val loss) {
  if (loss.tape != this || loss.id < 0 || loss.id >= int(nodes_.size())) {
    throw ShapeError("backward: loss is not a node of this tape");
  }
  const Tensor& lv = value(loss);
  if (lv.rows != 1 || lv.cols != 1) {
    throw ShapeError("backward: loss must be scalar, got " + lv.shape_str());
  }
  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.rows, n.value.cols);
  }
  nodes_[size_t(loss.id)].grad.data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[size_t(id)];
    if (n.back) n.back(*this, id);
  }
}

Val matmul(Val a, Val b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (A.cols != B.rows) shape_fail("matmul", A, B);
  Tensor out(A.rows, B.cols);
  mm_acc(A, B, out);
  return t.push(std::move(out), [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    mm_nt_acc(g, t.value(bi), t.grad_ref(ai));
    mm_tn_acc(t.value(ai), g, t.grad_ref(bi));
  });
}

Val matmul_nt(Val a, Val b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (A.cols != B.cols) shape_fail("matmul_nt", A, B);
  Tensor out(A.rows, B.rows);
  mm_nt_acc(A, B, out);
  return t.push(std::move(out), [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);  // r x n
    mm_acc(g, t.value(bi), t.grad_ref(ai));          // gA += g * B
    mm_tn_acc(g, t.value(ai), t.grad_ref(bi));       // gB += g^T * A
  });
}

Val add(Val a, Val b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  Bcast mode = bcast_mode("add", A, B);
  Tensor out = A;
  if (mode == Bcast::Same) {
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
  } else {
    for (int i = 0; i < out.rows; ++i) {
      double* oi = out.row_ptr(i);
      for (int j = 0; j < out.cols; ++j) oi[j] += B.data[size_t(j)];
    }
  }
  return t.push(std::move(out), [ai = a.id, bi = b.id, mode](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& ga = t.grad_ref(ai);
    for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    Tensor& gb = t.grad_ref(bi);
    if (mode == Bcast::Same) {
      for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
    } else {
      add_colsum(g, gb);
    }
  });
}

Val sub(Val a, Val b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  Bcast mode = bcast_mode("sub", A, B);
  Tensor out = A;
  if (mode == Bcast::Same) {
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
  } else {
    for (int i = 0; i < out.rows; ++i) {
      double* oi = out.row_ptr(i);
      for (int j = 0; j < out.cols; ++j) oi[j] -= B.data[size_t(j)];
    }
  }
  return t.push(std::move(out), [ai = a.id, bi = b.id, mode](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& ga = t.grad_ref(ai);
    for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    Tensor& gb = t.grad_ref(bi);
    if (mode == Bcast::Same) {
      for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
    } else {
      for (int i = 0; i < g.rows; ++i) {
        const double* gi = g.row_ptr(i);
        for (int j = 0; j < g.cols; ++j) gb.data[size_t(j)] -= gi[j];
      }
    }
  });
}

Val mul(Val a, Val b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  Bcast mode = bcast_mode("mul", A, B);
  Tensor out = A;
  if (mode == Bcast::Same) {
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
  } else {
    for (int i = 0; i < out.rows; ++i) {
      double* oi = out.row_ptr(i);
      for (int j = 0; j < out.cols; ++j) oi[j] *= B.data[size_t(j)];
    }
  }
  return t.push(std::move(out), [ai = a.id, bi = b.id, mode](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& A = t.value(ai);
    const Tensor& B = t.value(bi);
    Tensor& ga = t.grad_ref(ai);
    Tensor& gb = t.grad_ref(bi);
    if (mode == Bcast::Same) {
      for (size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] * B.data[i];
        gb.data[i] += g.data[i] * A.data[i];
      }
    } else {
      for (int i = 0; i < g.rows; ++i) {
        const double* gi = g.row_ptr(i);
        const double* airow = A.row_ptr(i);
        double* gai = ga.row_ptr(i);
        for (int j = 0; j < g.cols; ++j) {
          gai[j] += gi[j] * B.data[size_t(j)];
          gb.data[size_t(j)] += gi[j] * airow[j];
        }
      }
    }
  });
}

Val relu(Val x) {
  return unary_map(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; }, "relu");
}

Val sigmoid(Val x) {
  return unary_map(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Val tanh(Val x) {
  return unary_map(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; }, "tanh");
}

Val log(Val x) {
  return unary_map(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; }, "log");
}

Val clamp(Val x, double lo, double hi) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  Tensor out = in;
  for (double& v : out.data) v = std::min(std::max(v, lo), hi);
  return t.push(std::move(out), [xi = x.id, lo, hi](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& in = t.value(xi);
    Tensor& gx = t.grad_ref(xi);
    for (size_t i = 0; i < g.data.size(); ++i) {
      if (in.data[i] >= lo && in.data[i] <= hi) gx.data[i] += g.data[i];
    }
  });
}

Val scale(Val x, double c) { return affine(x, c, 0.0); }

Val affine(Val x, double m, double a) {
  Tape& t = *x.tape;
  Tensor out = t.value(x);
  for (double& v : out.data) v = m * v + a;
  return t.push(std::move(out), [xi = x.id, m](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(xi);
    for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += m * g.data[i];
  });
}

Val softmax_rows(Val x) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  Tensor out(in.rows, in.cols);
  std::vector<double> exps(size_t(in.cols));
  for (int i = 0; i < in.rows; ++i) {
    const double* xi = in.row_ptr(i);
    double mx = xi[0];
    for (int j = 1; j < in.cols; ++j) mx = std::max(mx, xi[j]);
    for (int j = 0; j < in.cols; ++j) exps[size_t(j)] = std::exp(xi[j] - mx);
    // Denominator summed in sorted order so the result does not depend on
    // the ordering of equal inputs (exact permutation equivariance).
    std::vector<double> sorted = exps;
    std::sort(sorted.begin(), sorted.end());
    double denom = 0.0;
    for (double e : sorted) denom += e;
    double* oi = out.row_ptr(i);
    for (int j = 0; j < in.cols; ++j) oi[j] = exps[size_t(j)] / denom;
  }
  return t.push(std::move(out), [xi = x.id](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_ref(xi);
    for (int i = 0; i < y.rows; ++i) {
      const double* gi = g.row_ptr(i);
      const double* yi = y.row_ptr(i);
      double dot = 0.0;
      for (int j = 0; j < y.cols; ++j) dot += gi[j] * yi[j];
      double* gxi = gx.row_ptr(i);
      for (int j = 0; j < y.cols; ++j) gxi[j] += yi[j] * (gi[j] - dot);
    }
  });
}

Val layernorm_rows(Val x, Val gain, Val bias, double eps) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  const Tensor& g = t.value(gain);
  const Tensor& b = t.value(bias);
  if (g.rows != 1 || g.cols != in.cols) shape_fail("layernorm_rows gain", in, g);
  if (b.rows != 1 || b.cols != in.cols) shape_fail("layernorm_rows bias", in, b);
  Tensor out(in.rows, in.cols);
  for (int i = 0; i < in.rows; ++i) {
    const double* xi = in.row_ptr(i);
    double mu = 0.0;
    for (int j = 0; j < in.cols; ++j) mu += xi[j];
    mu /= in.cols;
    double var = 0.0;
    for (int j = 0; j < in.cols; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= in.cols;
    double inv = 1.0 / std::sqrt(var + eps);
    double* oi = out.row_ptr(i);
    for (int j = 0; j < in.cols; ++j) {
      oi[j] = (xi[j] - mu) * inv * g.data[size_t(j)] + b.data[size_t(j)];
    }
  }
  return t.push(std::move(out), [xi = x.id, gi = gain.id, bi = bias.id, eps](Tape& t, int self) {
    const Tensor& gout = t.grad_ref(self);
    const Tensor& in = t.value(xi);
    const Tensor& gain = t.value(gi);
    Tensor& gx = t.grad_ref(xi);
    Tensor& gg = t.grad_ref(gi);
    Tensor& gb = t.grad_ref(bi);
    const int c = in.cols;
    for (int i = 0; i < in.rows; ++i) {
      const double* x = in.row_ptr(i);
      const double* go = gout.row_ptr(i);
      double mu = 0.0;
      for (int j = 0; j < c; ++j) mu += x[j];
      mu /= c;
      double var = 0.0;
      for (int j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
      var /= c;
      double inv = 1.0 / std::sqrt(var + eps);
      // dL/dxhat, and the two row reductions the gradient needs.
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int j = 0; j < c; ++j) {
        double xhat = (x[j] - mu) * inv;
        double dxhat = go[j] * gain.data[size_t(j)];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        gg.data[size_t(j)] += go[j] * xhat;
        gb.data[size_t(j)] += go[j];
      }
      double* gxi = gx.row_ptr(i);
      for (int j = 0; j < c; ++j) {
        double xhat = (x[j] - mu) * inv;
        double dxhat = go[j] * gain.data[size_t(j)];
        gxi[j] += inv * (dxhat - sum_dxhat / c - xhat * sum_dxhat_xhat / c);
      }
    }
  });
}

Val concat_rows(const std::vector<Val>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Tape& t = *parts[0].tape;
  int cols = t.value(parts[0]).cols;
  int rows = 0;
  for (Val p : parts) {
    const Tensor& v = t.value(p);
    if (v.cols != cols) shape_fail("concat_rows", t.value(parts[0]), v);
    rows += v.rows;
  }
  Tensor out(rows, cols);
  std::vector<int> ids;
  std::vector<int> offsets;
  int at = 0;
  for (Val p : parts) {
    const Tensor& v = t.value(p);
    std::memcpy(out.row_ptr(at), v.data.data(), v.data.size() * sizeof(double));
    ids.push_back(p.id);
    offsets.push_back(at);
    at += v.rows;
  }
  return t.push(std::move(out), [ids, offsets](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    for (size_t k = 0; k < ids.size(); ++k) {
      Tensor& gp = t.grad_ref(ids[k]);
      const double* src = g.row_ptr(offsets[k]);
      for (size_t i = 0; i < gp.data.size(); ++i) gp.data[i] += src[i];
    }
  });
}

Val concat_cols(const std::vector<Val>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Tape& t = *parts[0].tape;
  int rows = t.value(parts[0]).rows;
  int cols = 0;
  for (Val p : parts) {
    const Tensor& v = t.value(p);
    if (v.rows != rows) shape_fail("concat_cols", t.value(parts[0]), v);
    cols += v.cols;
  }
  Tensor out(rows, cols);
  std::vector<int> ids;
  std::vector<int> offsets;
  int at = 0;
  for (Val p : parts) {
    const Tensor& v = t.value(p);
    for (int i = 0; i < rows; ++i) {
      std::memcpy(out.row_ptr(i) + at, v.row_ptr(i), size_t(v.cols) * sizeof(double));
    }
    ids.push_back(p.id);
    offsets.push_back(at);
    at += v.cols;
  }
  return t.push(std::move(out), [ids, offsets](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    for (size_t k = 0; k < ids.size(); ++k) {
      Tensor& gp = t.grad_ref(ids[k]);
      for (int i = 0; i < gp.rows; ++i) {
        const double* src = g.row_ptr(i) + offsets[k];
        double* dst = gp.row_ptr(i);
        for (int j = 0; j < gp.cols; ++j) dst[j] += src[j];
      }
    }
  });
}

Val slice_rows(Val x, int start, int len) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  if (start < 0 || len < 0 || start + len > in.rows) shape_fail("slice_rows", in);
  Tensor out(len, in.cols);
  std::memcpy(out.data.data(), in.row_ptr(start), out.data.size() * sizeof(double));
  return t.push(std::move(out), [xi = x.id, start](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(xi);
    double* dst = gx.row_ptr(start);
    for (size_t i = 0; i < g.data.size(); ++i) dst[i] += g.data[i];
  });
}

Val slice_cols(Val x, int start, int len) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  if (start < 0 || len < 0 || start + len > in.cols) shape_fail("slice_cols", in);
  Tensor out(in.rows, len);
  for (int i = 0; i < in.rows; ++i) {
    std::memcpy(out.row_ptr(i), in.row_ptr(i) + start, size_t(len) * sizeof(double));
  }
  return t.push(std::move(out), [xi = x.id, start](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(xi);
    for (int i = 0; i < g.rows; ++i) {
      const double* src = g.row_ptr(i);
      double* dst = gx.row_ptr(i) + start;
      for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
    }
  });
}

Val reshape(Val x, int r, int c) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  if (r * c != in.size()) shape_fail("reshape", in);
  Tensor out = in;
  out.rows = r;
  out.cols = c;
  return t.push(std::move(out), [xi = x.id](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(xi);
    for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
  });
}

Val pad_rows(Val x, int total_rows) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  if (total_rows < in.rows) shape_fail("pad_rows", in);
  Tensor out(total_rows, in.cols);
  std::memcpy(out.data.data(), in.data.data(), in.data.size() * sizeof(double));
  return t.push(std::move(out), [xi = x.id](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(xi);
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];
  });
}

Val broadcast_rows(Val row_vec, int rows) {
  Tape& t = *row_vec.tape;
  const Tensor& in = t.value(row_vec);
  if (in.rows != 1) shape_fail("broadcast_rows", in);
  Tensor out(rows, in.cols);
  for (int i = 0; i < rows; ++i) {
    std::memcpy(out.row_ptr(i), in.data.data(), size_t(in.cols) * sizeof(double));
  }
  return t.push(std::move(out), [xi = row_vec.id](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    add_colsum(g, t.grad_ref(xi));
  });
}

Val max_pool_rows(Val x) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  if (in.rows < 1) shape_fail("max_pool_rows", in);
  Tensor out(1, in.cols);
  auto arg = std::make_shared<std::vector<int>>(size_t(in.cols), 0);
  for (int j = 0; j < in.cols; ++j) {
    double best = in.at(0, j);
    int bi = 0;
    for (int i = 1; i < in.rows; ++i) {
      if (in.at(i, j) > best) {
        best = in.at(i, j);
        bi = i;
      }
    }
    out.data[size_t(j)] = best;
    (*arg)[size_t(j)] = bi;
  }
  return t.push(std::move(out), [xi = x.id, arg](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(xi);
    for (int j = 0; j < g.cols; ++j) {
      gx.at((*arg)[size_t(j)], j) += g.data[size_t(j)];
    }
  });
}

Val sum(Val x) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  double total = 0.0;
  for (double v : in.data) total += v;
  return t.push(Tensor::scalar(total), [xi = x.id](Tape& t, int self) {
    const double g = t.grad_ref(self).data[0];
    Tensor& gx = t.grad_ref(xi);
    for (double& v : gx.data) v += g;
  });
}

Val mean(Val x) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  if (in.size() == 0) shape_fail("mean", in);
  return scale(sum(x), 1.0 / in.size());
}

Val gather_rows(Val x, std::vector<int> idx) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  Tensor out(int(idx.size()), in.cols);
  for (size_t e = 0; e < idx.size(); ++e) {
    std::memcpy(out.row_ptr(int(e)), in.row_ptr(idx[e]), size_t(in.cols) * sizeof(double));
  }
  auto ids = std::make_shared<std::vector<int>>(std::move(idx));
  return t.push(std::move(out), [xi = x.id, ids](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(xi);
    for (size_t e = 0; e < ids->size(); ++e) {
      const double* src = g.row_ptr(int(e));
      double* dst = gx.row_ptr((*ids)[e]);
      for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
    }
  });
}

Val scatter_add_rows(Val src, std::vector<int> dst, int out_rows) {
  Tape& t = *src.tape;
  const Tensor& in = t.value(src);
  if (int(dst.size()) != in.rows) shape_fail("scatter_add_rows", in);
  Tensor out(out_rows, in.cols);
  // Group sources per destination and sum each group in content-sorted
  // order: the aggregate is then bit-identical under any permutation of the
  // incoming rows.
  std::vector<std::vector<int>> per_dst;
  per_dst.resize(size_t(out_rows));
  for (size_t e = 0; e < dst.size(); ++e) per_dst[size_t(dst[e])].push_back(int(e));
  const int c = in.cols;
  for (int r = 0; r < out_rows; ++r) {
    auto& rows = per_dst[size_t(r)];
    std::sort(rows.begin(), rows.end(), [&](int a, int b) {
      const double* pa = in.row_ptr(a);
      const double* pb = in.row_ptr(b);
      return std::lexicographical_compare(pa, pa + c, pb, pb + c);
    });
    double* o = out.row_ptr(r);
    for (int e : rows) {
      const double* s = in.row_ptr(e);
      for (int j = 0; j < c; ++j) o[j] += s[j];
    }
  }
  auto ids = std::make_shared<std::vector<int>>(std::move(dst));
  return t.push(std::move(out), [si = src.id, ids](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gs = t.grad_ref(si);
    for (size_t e = 0; e < ids->size(); ++e) {
      const double* src = g.row_ptr((*ids)[e]);
      double* d = gs.row_ptr(int(e));
      for (int j = 0; j < g.cols; ++j) d[j] += src[j];
    }
  });
}

Val linear(Val x, Val w, Val b) { return add(matmul(x, w), b); }

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  index_[name] = int(entries_.size());
  entries_.push_back(Entry{name, std::move(init)});
  return entries_.back().value;
}

Tensor& ParamStore::get(const std::string& name) {
  return entries_[size_t(index_of(name))].value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  return entries_[size_t(index_of(name))].value;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

int64_t ParamStore::scalar_count() const {
  int64_t total = 0;
  for (const Entry& e : entries_) total += e.value.size();
  return total;
}

std::vector<Tensor> ParamStore::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.emplace_back(e.value.rows, e.value.cols);
  return out;
}

Val ParamBinding::operator()(const std::string& name) {
  int idx = params_->index_of(name);
  auto it = bound_.find(idx);
  if (it != bound_.end()) return it->second;
  Val v = tape_->input(params_->tensor(idx));
  bound_[idx] = v;
  return v;
}

void ParamBinding::accumulate_grads(std::vector<Tensor>& grads) const {
  for (const auto& [idx, val] : bound_) {
    const Tensor& g = tape_->grad(val);
    Tensor& acc = grads[size_t(idx)];
    for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
  }
}

void adam_step(ParamStore& params, AdamState& state, const std::vector<Tensor>& grads,
               const AdamConfig& cfg) {
  if (int(grads.size()) != params.count()) {
    throw std::invalid_argument("adam_step: gradient count mismatch");
  }
  if (state.m.empty()) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (int i = 0; i < params.count(); ++i) {
    Tensor& p = params.tensor(i);
    const Tensor& g = grads[size_t(i)];
    if (g.rows != p.rows || g.cols != p.cols) {
      throw std::invalid_argument("adam_step: missing or misshaped gradient for " +
                                  params.name(i));
    }
    Tensor& m = state.m[size_t(i)];
    Tensor& v = state.v[size_t(i)];
    for (size_t k = 0; k < p.data.size(); ++k) {
      p.data[k] -= cfg.lr * cfg.weight_decay * p.data[k];
      m.data[k] = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * g.data[k];
      v.data[k] = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * g.data[k] * g.data[k];
      double mhat = m.data[k] / bc1;
      double vhat = v.data[k] / bc2;
      p.data[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void save_checkpoint(const std::string& path, const ParamStore& params) {
  ordered_json header = ordered_json::object();
  int64_t offset = 0;
  for (int i = 0; i < params.count(); ++i) {
    const Tensor& t = params.tensor(i);
    header[params.name(i)] = {{"shape", {t.rows, t.cols}},
                              {"dtype", "f32"},
                              {"byte_offset", offset}};
    offset += int64_t(t.size()) * 4;
  }
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write("SATFCKPT", 8);
  uint64_t len = header_str.size();
  char len_le[8];
  for (int i = 0; i < 8; ++i) len_le[i] = char((len >> (8 * i)) & 0xff);
  out.write(len_le, 8);
  out.write(header_str.data(), std::streamsize(header_str.size()));
  for (int i = 0; i < params.count(); ++i) {
    const Tensor& t = params.tensor(i);
    std::vector<float> f(t.data.begin(), t.data.end());
    out.write(reinterpret_cast<const char*>(f.data()), std::streamsize(f.size() * 4));
  }
  if (!out) throw IoError("write failed: " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "SATFCKPT", 8) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  char len_le[8];
  in.read(len_le, 8);
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= uint64_t(uint8_t(len_le[i])) << (8 * i);
  std::string header_str(len, '\0');
  in.read(header_str.data(), std::streamsize(len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  ordered_json header = ordered_json::parse(header_str);

  ParamStore params;
  for (auto it = header.begin(); it != header.end(); ++it) {
    const auto& desc = it.value();
    int r = desc["shape"][0].get<int>();
    int c = desc["shape"][1].get<int>();
    if (desc["dtype"].get<std::string>() != "f32") {
      throw std::runtime_error("unsupported dtype in checkpoint: " + path);
    }
    Tensor t(r, c);
    std::vector<float> f(size_t(t.size()));
    in.read(reinterpret_cast<char*>(f.data()), std::streamsize(f.size() * 4));
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
    for (size_t k = 0; k < f.size(); ++k) t.data[k] = double(f[k]);
    params.add(it.key(), std::move(t));
  }
  return params;
}

void quantize_f32(ParamStore& params) {
  for (int i = 0; i < params.count(); ++i) {
    for (double& v : params.tensor(i).data) v = double(float(v));
  }
}

int64_t param_count(const ParamStore& params) { return params.scalar_count(); }

}  // namespace satformer::ad
