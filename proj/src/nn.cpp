#include "airtrack/nn.hpp"

#include <cmath>

namespace airtrack::nn {

Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
  }
  return m;
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng)
    : weight(name + ".weight", glorot(out, in, rng)),
      bias(name + ".bias", Matrix::Zero(out, 1)) {}

Var Linear::forward(Tape& tape, Var x) const {
  return ad::add_bias(ad::matmul(tape.param(weight), x), tape.param(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Conv2d::Conv2d(const std::string& name, const ad::ConvShape& s, int out_channels, Rng& rng)
    : shape(s) {
  const int fan_in = s.in_channels * s.kernel * s.kernel;
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + out_channels));
  Matrix w(out_channels, fan_in);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
  }
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", Matrix::Zero(out_channels, 1));
}

Var Conv2d::forward(Tape& tape, Var x) const {
  return ad::conv2d(x, tape.param(weight), tape.param(bias), shape);
}

void Conv2d::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

RecurrentCell::RecurrentCell(const std::string& name, CellType t, int input, int hidden, Rng& rng)
    : type(t) {
  const int g = gates();
  w_input = Parameter(name + ".w_input", glorot(g * hidden, input, rng));
  w_hidden = Parameter(name + ".w_hidden", glorot(g * hidden, hidden, rng));
  bias = Parameter(name + ".bias", Matrix::Zero(g * hidden, 1));
}

RecurrentState RecurrentCell::zero_state(Tape& tape) const {
  const Eigen::Index n = hidden_size();
  RecurrentState s;
  s.h = tape.constant(Matrix::Zero(n, 1));
  s.c = tape.constant(Matrix::Zero(n, 1));
  return s;
}

RecurrentState RecurrentCell::step(Tape& tape, Var x, const RecurrentState& state) const {
  const Eigen::Index n = hidden_size();
  const Var wx = ad::add_bias(ad::matmul(tape.param(w_input), x), tape.param(bias));
  const Var uh = ad::matmul(tape.param(w_hidden), state.h);
  RecurrentState next;
  if (linear) {
    next.h = ad::add(ad::slice_rows(wx, 0, n), ad::slice_rows(uh, 0, n));
    next.c = state.c;
  } else if (type == CellType::kGru) {
    const Var z = ad::activate(
        ad::add(ad::slice_rows(wx, 0, n), ad::slice_rows(uh, 0, n)), gate_act);
    const Var r = ad::activate(
        ad::add(ad::slice_rows(wx, n, n), ad::slice_rows(uh, n, n)), gate_act);
    const Var cand = ad::activate(
        ad::add(ad::slice_rows(wx, 2 * n, n), ad::mul(r, ad::slice_rows(uh, 2 * n, n))), cand_act);
    // h' = n + z * (h - n)
    next.h = ad::add(cand, ad::mul(z, ad::sub(state.h, cand)));
    next.c = state.c;
  } else {
    const Var pre = ad::add(wx, uh);
    const Var in_gate = ad::activate(ad::slice_rows(pre, 0, n), gate_act);
    const Var forget = ad::activate(ad::slice_rows(pre, n, n), gate_act);
    const Var out_gate = ad::activate(ad::slice_rows(pre, 2 * n, n), gate_act);
    const Var cand = ad::activate(ad::slice_rows(pre, 3 * n, n), cand_act);
    next.c = ad::add(ad::mul(forget, state.c), ad::mul(in_gate, cand));
    next.h = ad::mul(out_gate, ad::activate(next.c, cand_act));
  }
  return next;
}

void RecurrentCell::collect(std::vector<Parameter*>& out) {
  out.push_back(&w_input);
  out.push_back(&w_hidden);
  out.push_back(&bias);
}

}  // namespace airtrack::nn
