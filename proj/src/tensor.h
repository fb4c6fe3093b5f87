// src/tensor.h
// Minimal reverse-mode differentiation engine. Every op computes its value
// eagerly and records a backprop closure; backward() walks the implicit DAG
// from a scalar loss in reverse topological order. Shapes are exact: no
// broadcasting anywhere.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "common.h"

namespace l2w {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  std::vector<int> shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // sized on demand by backward()
  bool requires_grad = false;
  std::string name;                       // nonempty for parameters
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;    // scatters this->grad into parents

  int64_t size() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  Real& at(int r, int c) { return value[static_cast<int64_t>(r) * cols() + c]; }
  Real at(int r, int c) const {
    return value[static_cast<int64_t>(r) * cols() + c];
  }
  Real item() const { return value.at(0); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// ---- leaves ----
Var constant(std::vector<int> shape, std::vector<Real> values);
Var scalar_const(Real v);
// Leaf with requires_grad set; used for parameters and for inputs under
// finite-difference scrutiny.
Var leaf(std::string name, std::vector<int> shape, std::vector<Real> values);

// ---- primitives ----
// x: {T, Cin}, w: {K, Cin, Cout}, b: {Cout}. Output length
// T' = floor((T + 2*pad - K) / stride) + 1.
Var conv1d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var linear(const Var& x, const Var& w, const Var& b);  // {N,I}x{I,O}+{O}
Var relu(const Var& x);
Var glu(const Var& x);  // {T, 2C} -> {T, C}, first half gated by second
// Global max over valid rows, per column: {T, C} -> {C}.
Var maxpool1d_masked(const Var& x, const std::vector<uint8_t>& valid);
Var layernorm(const Var& x, const Var& gain, const Var& bias);  // over cols
Var softmax_rows(const Var& x);
Var softmax_rows_causal(const Var& x);  // square input; row i sees cols 0..i
Var log_softmax_rows(const Var& x);
Var matmul(const Var& a, const Var& b, bool transpose_b = false);
Var dot(const Var& a, const Var& b);  // same shape, flattened inner product
Var add(const Var& a, const Var& b);
Var scale(const Var& x, Real c);
Var logsumexp(const Var& x);  // over all elements -> scalar
// Rows past valid_len come out as zeros and receive no gradient
// (valid_len < 0 means all rows valid).
Var embedding_lookup(const Var& table, const std::vector<int>& ids,
                     int valid_len = -1);
Var stack_rows(const std::vector<Var>& rows);     // n x {d} -> {n, d}
Var concat_cols(const std::vector<Var>& mats);    // {T,c1},{T,c2}.. -> {T,Σc}
Var row(const Var& x, int r);                     // {R,C} -> {C}
// Per-row L2-ball projection, differentiated through the rescale factor.
Var project_l2ball_rows(const Var& x, Real rho);

// Escape hatch for module-level ops (CTC builds its own node).
Var make_op(std::vector<int> shape, std::vector<Real> value,
            std::vector<Var> parents, std::function<void(Node&)> backprop);

// Accumulates into .grad of every reachable node with requires_grad.
void backward(const Var& loss);

void sgd_step(const std::vector<Var>& params, Real lr);

// ---- parameter store ----
class ParamStore {
 public:
  // uniform(-init_scale, init_scale) init; registration order is stable.
  Var create(const std::string& name, std::vector<int> shape, Real init_scale,
             Rng& rng);
  Var create_const(const std::string& name, std::vector<int> shape, Real fill);
  const Var& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<Var>& all() const { return order_; }
  void zero_grads();
  void sgd_step(Real lr);
  int64_t total_size() const;

 private:
  std::vector<Var> order_;
};

// ---- finite-difference oracle ----
// fn rebuilds the forward graph from the current parameter values and
// returns the scalar loss. Checks determinism (two evaluations must agree
// bitwise), then compares analytic gradients against central differences on
// up to max_coords sampled coordinates per parameter.
double finite_difference_check(const std::function<Var()>& fn,
                               const std::vector<Var>& params, double epsilon,
                               int max_coords = 200, uint64_t seed = 1234);

}  // namespace l2w
