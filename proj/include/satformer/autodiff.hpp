#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "satformer/rng.hpp"

namespace satformer::ad {

// Dense row-major matrix of doubles. Scalars are 1x1, vectors 1xC.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(size_t(r) * size_t(c), 0.0) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double v) {
    Tensor t(r, c);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor row(std::vector<double> v) {
    Tensor t;
    t.rows = 1;
    t.cols = int(v.size());
    t.data = std::move(v);
    return t;
  }
  static Tensor from_rows(const std::vector<std::vector<double>>& rows_in);
  static Tensor randn(int r, int c, double stddev, Rng& rng);

  int size() const { return rows * cols; }
  double& at(int r, int c) { return data[size_t(r) * cols + c]; }
  double at(int r, int c) const { return data[size_t(r) * cols + c]; }
  double* row_ptr(int r) { return data.data() + size_t(r) * cols; }
  const double* row_ptr(int r) const { return data.data() + size_t(r) * cols; }

  std::string shape_str() const;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Tape;

// Handle to a node on a tape.
struct Val {
  Tape* tape = nullptr;
  int id = -1;
};

// Append-only operation tape; append order is the topological order used by
// the reverse sweep. One tape per instance; tapes are single-threaded.
class Tape {
 public:
  Val input(Tensor value);

  const Tensor& value(Val v) const { return nodes_[size_t(v.id)].value; }
  const Tensor& value(int id) const { return nodes_[size_t(id)].value; }
  // Gradient of the last backward() loss w.r.t. this node.
  const Tensor& grad(Val v) const { return nodes_[size_t(v.id)].grad; }
  Tensor& grad_ref(int id) { return nodes_[size_t(id)].grad; }

  // Reverse sweep from a scalar loss; populates grad for every node.
  void backward(Val loss);

  int size() const { return int(nodes_.size()); }

  Val push(Tensor value, std::function<void(Tape&, int)> back);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, int)> back;  // empty for leaves
  };
  std::vector<Node> nodes_;
};

// Primitives. Shapes are validated; mismatches throw ShapeError naming both
// shapes. add/sub/mul broadcast a 1xC right operand over the rows of an RxC
// left operand.
Val matmul(Val a, Val b);     // (r x k)(k x c)
Val matmul_nt(Val a, Val b);  // A * B^T: (r x k)(c x k) -> r x c
Val add(Val a, Val b);
Val sub(Val a, Val b);
Val mul(Val a, Val b);
Val relu(Val x);
Val sigmoid(Val x);
Val tanh(Val x);
Val log(Val x);
Val clamp(Val x, double lo, double hi);
Val scale(Val x, double c);
Val affine(Val x, double mul, double add);  // mul*x + add elementwise
Val softmax_rows(Val x);
Val layernorm_rows(Val x, Val gain, Val bias, double eps = 1e-6);
Val concat_rows(const std::vector<Val>& parts);
Val concat_cols(const std::vector<Val>& parts);
Val slice_rows(Val x, int start, int len);
Val slice_cols(Val x, int start, int len);
Val reshape(Val x, int r, int c);
Val pad_rows(Val x, int total_rows);  // append zero rows
Val broadcast_rows(Val row_vec, int rows);
Val max_pool_rows(Val x);  // 1 x C column-wise maxima
Val sum(Val x);            // 1 x 1
Val mean(Val x);           // 1 x 1
Val gather_rows(Val x, std::vector<int> idx);
Val scatter_add_rows(Val src, std::vector<int> dst, int out_rows);
Val linear(Val x, Val w, Val b);  // x*w + b, b is 1 x C

inline Val operator+(Val a, Val b) { return add(a, b); }
inline Val operator-(Val a, Val b) { return sub(a, b); }
inline Val operator*(Val a, Val b) { return mul(a, b); }

// Ordered map of named trainable tensors. Iteration order is insertion
// order, which fixes the checkpoint payload layout.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  int count() const { return int(entries_.size()); }
  const std::string& name(int i) const { return entries_[size_t(i)].name; }
  Tensor& tensor(int i) { return entries_[size_t(i)].value; }
  const Tensor& tensor(int i) const { return entries_[size_t(i)].value; }
  int index_of(const std::string& name) const;

  int64_t scalar_count() const;

  // Same-shape zero tensors, aligned by index; the gradient accumulator.
  std::vector<Tensor> zeros_like() const;

 private:
  struct Entry {
    std::string name;
    Tensor value;
  };
  std::vector<Entry> entries_;
  std::map<std::string, int> index_;
};

// Per-tape memo of parameter leaves: each parameter becomes one leaf node on
// first use, and its gradient can be folded back into an accumulator.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParamStore& params) : tape_(&tape), params_(&params) {}

  Val operator()(const std::string& name);

  // grads[i] += d(loss)/d(param i) for every bound parameter.
  void accumulate_grads(std::vector<Tensor>& grads) const;

 private:
  Tape* tape_;
  const ParamStore* params_;
  std::map<int, Val> bound_;  // param index -> leaf
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-10;
};

struct AdamState {
  int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Adam with decoupled weight decay applied as p <- p - lr*wd*p before the
// moment update.
void adam_step(ParamStore& params, AdamState& state, const std::vector<Tensor>& grads,
               const AdamConfig& cfg);

// Checkpoint: 8-byte magic "SATFCKPT", u64 LE header length, UTF-8 JSON
// header {name -> {shape, dtype:"f32", byte_offset}}, then raw little-endian
// f32 payloads in header order.
void save_checkpoint(const std::string& path, const ParamStore& params);
ParamStore load_checkpoint(const std::string& path);

// Quantize every parameter through f32, in place. A loaded checkpoint
// reproduces forward outputs of the quantized store bit for bit.
void quantize_f32(ParamStore& params);

int64_t param_count(const ParamStore& params);

}  // namespace satformer::ad
