#include "airtrack/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "airtrack/core.hpp"

namespace airtrack::ad {

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, nullptr});
  requires_.push_back(false);
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{this, it->second};
  bound_.emplace(&p, static_cast<int>(nodes_.size()));
  Parameter* sink = record_gradients_ ? const_cast<Parameter*>(&p) : nullptr;
  nodes_.push_back(Node{p.value, Matrix(), nullptr, sink});
  requires_.push_back(record_gradients_);
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, Backward backward, std::initializer_list<Var> inputs) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || requires_[v.id];
  return record(std::move(value), std::move(backward), needs);
}

Var Tape::record(Matrix value, Backward backward, bool needs) {
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : nullptr, nullptr});
  requires_.push_back(needs);
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.value().size() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "backward requires a scalar loss");
  }
  grad(loss.id).setOnes();
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error(ErrorCode::kInvalidArgument, "vars from different tapes");
  return *a.tape;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw Error(ErrorCode::kDimensionMismatch, "matmul: inner dims");
  const int ia = a.id, ib = b.id;
  return t.record(
      a.value() * b.value(),
      [ia, ib](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        if (tape.requires_grad(ia)) tape.grad(ia).noalias() += g * tape.value(ib).transpose();
        if (tape.requires_grad(ib)) tape.grad(ib).noalias() += tape.value(ia).transpose() * g;
      },
      {a, b});
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  const int ia = a.id, ib = b.id;
  return t.record(
      a.value() + b.value(),
      [ia, ib](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        if (tape.requires_grad(ia)) tape.grad(ia) += g;
        if (tape.requires_grad(ib)) tape.grad(ib) += g;
      },
      {a, b});
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id, ib = b.id;
  return t.record(
      a.value() - b.value(),
      [ia, ib](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        if (tape.requires_grad(ia)) tape.grad(ia) += g;
        if (tape.requires_grad(ib)) tape.grad(ib) -= g;
      },
      {a, b});
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "mul");
  const int ia = a.id, ib = b.id;
  return t.record(
      a.value().cwiseProduct(b.value()),
      [ia, ib](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        if (tape.requires_grad(ia)) tape.grad(ia) += g.cwiseProduct(tape.value(ib));
        if (tape.requires_grad(ib)) tape.grad(ib) += g.cwiseProduct(tape.value(ia));
      },
      {a, b});
}

Var add_bias(Var a, Var bias) {
  Tape& t = same_tape(a, bias);
  if (bias.cols() != 1 || bias.rows() != a.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "add_bias: bias must be (rows x 1)");
  }
  const int ia = a.id, ib = bias.id;
  Matrix out = a.value();
  out.colwise() += bias.value().col(0);
  return t.record(
      std::move(out),
      [ia, ib](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        if (tape.requires_grad(ia)) tape.grad(ia) += g;
        if (tape.requires_grad(ib)) tape.grad(ib) += g.rowwise().sum();
      },
      {a, bias});
}

Var mul_row_broadcast(Var a, Var row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "mul_row_broadcast: row must be (1 x cols)");
  }
  const int ia = a.id, ir = row.id;
  Matrix out = a.value();
  out.array().rowwise() *= row.value().row(0).array();
  return t.record(
      std::move(out),
      [ia, ir](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        if (tape.requires_grad(ia)) {
          Matrix ga = g;
          ga.array().rowwise() *= tape.value(ir).row(0).array();
          tape.grad(ia) += ga;
        }
        if (tape.requires_grad(ir)) {
          tape.grad(ir) += g.cwiseProduct(tape.value(ia)).colwise().sum();
        }
      },
      {a, row});
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double s, double c) {
  const int ia = a.id;
  return a.tape->record(
      (s * a.value().array() + c).matrix(),
      [ia, s](Tape& tape, int self) { tape.grad(ia) += s * tape.grad(self); },
      {a});
}

Var sigmoid(Var a) {
  const int ia = a.id;
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape->record(
      std::move(out),
      [ia](Tape& tape, int self) {
        const auto y = tape.value(self).array();
        tape.grad(ia).array() += tape.grad(self).array() * y * (1.0 - y);
      },
      {a});
}

Var tanh(Var a) {
  const int ia = a.id;
  return a.tape->record(
      a.value().array().tanh().matrix(),
      [ia](Tape& tape, int self) {
        const auto y = tape.value(self).array();
        tape.grad(ia).array() += tape.grad(self).array() * (1.0 - y.square());
      },
      {a});
}

Var relu(Var a) {
  const int ia = a.id;
  return a.tape->record(
      a.value().cwiseMax(0.0),
      [ia](Tape& tape, int self) {
        const auto x = tape.value(ia).array();
        tape.grad(ia).array() += (x > 0.0).select(tape.grad(self).array(), 0.0);
      },
      {a});
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::kTanh: return tanh(a);
    case Activation::kSigmoid: return sigmoid(a);
    case Activation::kRelu: return relu(a);
    case Activation::kIdentity: return a;
  }
  return a;
}

Var exp(Var a) {
  const int ia = a.id;
  return a.tape->record(
      a.value().array().exp().matrix(),
      [ia](Tape& tape, int self) {
        tape.grad(ia).array() += tape.grad(self).array() * tape.value(self).array();
      },
      {a});
}

Var log(Var a) {
  const int ia = a.id;
  return a.tape->record(
      a.value().array().log().matrix(),
      [ia](Tape& tape, int self) {
        tape.grad(ia).array() += tape.grad(self).array() / tape.value(ia).array();
      },
      {a});
}

Var reciprocal(Var a) {
  const int ia = a.id;
  return a.tape->record(
      a.value().array().inverse().matrix(),
      [ia](Tape& tape, int self) {
        tape.grad(ia).array() -= tape.grad(self).array() * tape.value(self).array().square();
      },
      {a});
}

Var square(Var a) {
  const int ia = a.id;
  return a.tape->record(
      a.value().array().square().matrix(),
      [ia](Tape& tape, int self) {
        tape.grad(ia).array() += 2.0 * tape.grad(self).array() * tape.value(ia).array();
      },
      {a});
}

Var sqrt(Var a) {
  const int ia = a.id;
  return a.tape->record(
      a.value().array().sqrt().matrix(),
      [ia](Tape& tape, int self) {
        tape.grad(ia).array() += 0.5 * tape.grad(self).array() / tape.value(self).array();
      },
      {a});
}

Var sum(Var a) {
  const int ia = a.id;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(
      std::move(out),
      [ia](Tape& tape, int self) { tape.grad(ia).array() += tape.grad(self)(0, 0); },
      {a});
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var transpose(Var a) {
  const int ia = a.id;
  return a.tape->record(
      a.value().transpose(),
      [ia](Tape& tape, int self) { tape.grad(ia) += tape.grad(self).transpose(); },
      {a});
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat_rows: no parts");
  Tape& t = *parts[0].tape;
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.tape != &t || p.cols() != cols) {
      throw Error(ErrorCode::kDimensionMismatch, "concat_rows: column mismatch");
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  bool needs = false;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    spans.emplace_back(p.id, offset);
    offset += p.rows();
    needs = needs || t.requires_grad(p.id);
  }
  return t.record(
      std::move(out),
      [spans = std::move(spans)](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        for (const auto& [id, off] : spans) {
          if (!tape.requires_grad(id)) continue;
          Matrix& gi = tape.grad(id);
          gi += g.middleRows(off, gi.rows());
        }
      },
      needs);
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat_cols: no parts");
  Tape& t = *parts[0].tape;
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.tape != &t || p.rows() != rows) {
      throw Error(ErrorCode::kDimensionMismatch, "concat_cols: row mismatch");
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  bool needs = false;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    spans.emplace_back(p.id, offset);
    offset += p.cols();
    needs = needs || t.requires_grad(p.id);
  }
  return t.record(
      std::move(out),
      [spans = std::move(spans)](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        for (const auto& [id, off] : spans) {
          if (!tape.requires_grad(id)) continue;
          Matrix& gi = tape.grad(id);
          gi += g.middleCols(off, gi.cols());
        }
      },
      needs);
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw Error(ErrorCode::kDimensionMismatch, "reshape: size mismatch");
  }
  const int ia = a.id;
  const Eigen::Index in_rows = a.rows(), in_cols = a.cols();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return a.tape->record(
      std::move(out),
      [ia, in_rows, in_cols](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        tape.grad(ia) += Eigen::Map<const Matrix>(g.data(), in_rows, in_cols);
      },
      {a});
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "slice_rows: out of range");
  }
  const int ia = a.id;
  return a.tape->record(
      a.value().middleRows(start, count),
      [ia, start, count](Tape& tape, int self) {
        tape.grad(ia).middleRows(start, count) += tape.grad(self);
      },
      {a});
}

namespace {

Matrix softmax_along_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const Eigen::ArrayXd e = (x.row(r).array() - m).exp().transpose();
    out.row(r) = (e / e.sum()).transpose().matrix();
  }
  return out;
}

}  // namespace

Var softmax_rows(Var a) {
  const int ia = a.id;
  return a.tape->record(
      softmax_along_rows(a.value()),
      [ia](Tape& tape, int self) {
        const Matrix& y = tape.value(self);
        const Matrix& g = tape.grad(self);
        const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
        Matrix gx = g;
        gx.colwise() -= dots;
        tape.grad(ia) += gx.cwiseProduct(y);
      },
      {a});
}

Var softmax_cols(Var a) {
  const int ia = a.id;
  return a.tape->record(
      softmax_along_rows(a.value().transpose()).transpose(),
      [ia](Tape& tape, int self) {
        const Matrix& y = tape.value(self);
        const Matrix& g = tape.grad(self);
        const Eigen::RowVectorXd dots = g.cwiseProduct(y).colwise().sum();
        Matrix gx = g;
        gx.rowwise() -= dots;
        tape.grad(ia) += gx.cwiseProduct(y);
      },
      {a});
}

namespace {

Matrix im2col(const Matrix& input, const ConvShape& s) {
  const int oh = s.out_height(), ow = s.out_width(), k = s.kernel;
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(s.in_channels) * k * k,
                             static_cast<Eigen::Index>(oh) * ow);
  for (int c = 0; c < s.in_channels; ++c) {
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + kr) * k + kc;
        for (int r = 0; r < oh; ++r) {
          const int ir = r * s.stride + kr - s.pad;
          if (ir < 0 || ir >= s.height) continue;
          for (int q = 0; q < ow; ++q) {
            const int ic = q * s.stride + kc - s.pad;
            if (ic < 0 || ic >= s.width) continue;
            cols(row, static_cast<Eigen::Index>(r) * ow + q) =
                input(c, static_cast<Eigen::Index>(ir) * s.width + ic);
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const Matrix& cols, const ConvShape& s, Matrix& input_grad) {
  const int oh = s.out_height(), ow = s.out_width(), k = s.kernel;
  for (int c = 0; c < s.in_channels; ++c) {
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + kr) * k + kc;
        for (int r = 0; r < oh; ++r) {
          const int ir = r * s.stride + kr - s.pad;
          if (ir < 0 || ir >= s.height) continue;
          for (int q = 0; q < ow; ++q) {
            const int ic = q * s.stride + kc - s.pad;
            if (ic < 0 || ic >= s.width) continue;
            input_grad(c, static_cast<Eigen::Index>(ir) * s.width + ic) +=
                cols(row, static_cast<Eigen::Index>(r) * ow + q);
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, const ConvShape& shape) {
  Tape& t = same_tape(input, weight);
  same_tape(input, bias);
  const int k2 = shape.kernel * shape.kernel;
  if (input.rows() != shape.in_channels ||
      input.cols() != static_cast<Eigen::Index>(shape.height) * shape.width) {
    throw Error(ErrorCode::kDimensionMismatch, "conv2d: input does not match shape");
  }
  if (weight.cols() != static_cast<Eigen::Index>(shape.in_channels) * k2 ||
      bias.rows() != weight.rows() || bias.cols() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "conv2d: weight/bias shape");
  }
  auto cols = std::make_shared<Matrix>(im2col(input.value(), shape));
  Matrix out = weight.value() * (*cols);
  out.colwise() += bias.value().col(0);
  const int ii = input.id, iw = weight.id, ib = bias.id;
  return t.record(
      std::move(out),
      [ii, iw, ib, cols, shape](Tape& tape, int self) {
        const Matrix& g = tape.grad(self);
        if (tape.requires_grad(iw)) tape.grad(iw).noalias() += g * cols->transpose();
        if (tape.requires_grad(ib)) tape.grad(ib) += g.rowwise().sum();
        if (tape.requires_grad(ii)) {
          const Matrix dcols = tape.value(iw).transpose() * g;
          col2im_add(dcols, shape, tape.grad(ii));
        }
      },
      {input, weight, bias});
}

double GradientDescent::apply(std::span<Parameter* const> params) const {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  const double factor = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  for (Parameter* p : params) p->value -= (step * factor) * p->grad;
  return norm;
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->grad.setZero(p->value.rows(), p->value.cols());
}

bool all_finite(std::span<Parameter* const> params) {
  return std::all_of(params.begin(), params.end(),
                     [](const Parameter* p) { return p->value.allFinite(); });
}

std::size_t parameter_count(std::span<Parameter* const> params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += static_cast<std::size_t>(p->size());
  return n;
}

double gradient_check(std::span<Parameter* const> params, const LossAndGrad& loss_and_grad,
                      const LossOnly& loss_only, int samples, double eps, Rng& rng) {
  zero_grad(params);
  loss_and_grad();
  const std::size_t total = parameter_count(params);
  if (total == 0) return 0.0;

  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    auto flat = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(total) - 1));
    std::size_t pi = 0;
    while (flat >= static_cast<std::size_t>(params[pi]->size())) {
      flat -= static_cast<std::size_t>(params[pi]->size());
      ++pi;
    }
    Parameter& p = *params[pi];
    double& entry = p.value.data()[flat];
    const double saved = entry;
    entry = saved + eps;
    const double up = loss_only();
    entry = saved - eps;
    const double down = loss_only();
    entry = saved;
    const double fd = (up - down) / (2.0 * eps);
    const double bp = p.grad.data()[flat];
    const double denom = std::max({std::abs(bp), std::abs(fd), 1e-8});
    worst = std::max(worst, std::abs(bp - fd) / denom);
  }
  return worst;
}

}  // namespace airtrack::ad
