// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every operation of one forward pass; backward() walks the
// records in reverse and accumulates gradients into the Parameters that were
// bound with Tape::param(). Feature maps are stored as (channels x H*W)
// matrices with row-major spatial flattening.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "airtrack/rng.hpp"

namespace airtrack::ad {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  Eigen::Index size() const { return value.size(); }
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Var constant(Matrix value);
  // Binds a parameter as a leaf; repeated binds on one tape share the leaf.
  // Gradients reach Parameter::grad only when the tape records gradients.
  Var param(const Parameter& p);

  explicit Tape(bool record_gradients = true) : record_gradients_(record_gradients) {}
  bool records_gradients() const { return record_gradients_; }

  // Records an op result. The backward closure is kept only when some input
  // requires a gradient.
  Var record(Matrix value, Backward backward, std::initializer_list<Var> inputs);
  Var record(Matrix value, Backward backward, bool requires_grad);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return requires_[id]; }
  // Gradient slot of a node, allocated as zeros on first access.
  Matrix& grad(int id);
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }

  // Seeds d(loss)/d(loss) = 1 and propagates. Parameter gradients are added to
  // Parameter::grad (not overwritten).
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  std::vector<bool> requires_;
  std::unordered_map<const Parameter*, int> bound_;
  bool record_gradients_ = true;
};

enum class Activation { kTanh, kSigmoid, kRelu, kIdentity };

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                 // elementwise
Var add_bias(Var a, Var bias);         // bias is (rows x 1), broadcast over columns
Var mul_row_broadcast(Var a, Var row); // row is (1 x cols), broadcast over rows
Var scale(Var a, double s);
Var affine(Var a, double s, double c); // s * a + c
Var activate(Var a, Activation act);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var reciprocal(Var a);
Var square(Var a);
Var sqrt(Var a);
Var sum(Var a);   // 1 x 1
Var mean(Var a);  // 1 x 1
Var transpose(Var a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);  // column-major order
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var softmax_rows(Var a);  // softmax along each row
Var softmax_cols(Var a);  // softmax along each column

struct ConvShape {
  int in_channels = 1;
  int height = 1;
  int width = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 0;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

// input: (in_channels x height*width); weight: (out_channels x in_channels*k*k);
// bias: (out_channels x 1). Returns (out_channels x out_h*out_w).
Var conv2d(Var input, Var weight, Var bias, const ConvShape& shape);

// Plain gradient descent with global-norm clipping.
struct GradientDescent {
  double step = 1e-2;
  double clip_norm = 5.0;

  // Applies one update from the accumulated gradients; returns the pre-clip
  // global gradient norm. Gradients are left untouched.
  double apply(std::span<Parameter* const> params) const;
};

void zero_grad(std::span<Parameter* const> params);
bool all_finite(std::span<Parameter* const> params);
std::size_t parameter_count(std::span<Parameter* const> params);

// Computes the loss and fills parameter gradients (after zeroing them).
using LossAndGrad = std::function<double()>;
// Computes the loss only.
using LossOnly = std::function<double()>;

// Central finite differences on `samples` randomly chosen parameter entries.
// Returns max |g_bp - g_fd| / max(|g_bp|, |g_fd|, 1e-8).
double gradient_check(std::span<Parameter* const> params, const LossAndGrad& loss_and_grad,
                      const LossOnly& loss_only, int samples, double eps, Rng& rng);

}  // namespace airtrack::ad
