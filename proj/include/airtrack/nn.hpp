// Layer building blocks on top of the autodiff tape.
#pragma once

#include <string>
#include <vector>

#include "airtrack/autodiff.hpp"
#include "airtrack/rng.hpp"

namespace airtrack::nn {

using ad::Activation;
using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

// Uniform Glorot initialisation.
Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// y = W x + b applied to each column of x.
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng);

  Var forward(Tape& tape, Var x) const;
  void collect(std::vector<Parameter*>& out);
  int in() const { return static_cast<int>(weight.value.cols()); }
  int out() const { return static_cast<int>(weight.value.rows()); }
};

struct Conv2d {
  Parameter weight;
  Parameter bias;
  ad::ConvShape shape;

  Conv2d() = default;
  Conv2d(const std::string& name, const ad::ConvShape& shape, int out_channels, Rng& rng);

  Var forward(Tape& tape, Var x) const;
  void collect(std::vector<Parameter*>& out);
  int out_channels() const { return static_cast<int>(weight.value.rows()); }
};

enum class CellType { kGru, kLstm };

struct RecurrentState {
  Var h;
  Var c;  // LSTM cell state; unused for GRU
};

// Gated recurrent cell.
//
// GRU:  z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
//       n = g(Wn x + r * (Un h) + bn), h' = (1 - z) * n + z * h
// LSTM: i, f, o = s(W x + U h + b), u = g(Wu x + Uu h + bu),
//       c' = f * c + i * u, h' = o * g(c')
// with s the gate activation (sigmoid) and g the candidate activation (tanh).
struct RecurrentCell {
  CellType type = CellType::kGru;
  Parameter w_input;   // (gates*hidden x input)
  Parameter w_hidden;  // (gates*hidden x hidden)
  Parameter bias;      // (gates*hidden x 1)
  Activation gate_act = Activation::kSigmoid;
  Activation cand_act = Activation::kTanh;
  // h' = W_x x + W_h h + b on the first gate block only; gates are unused.
  bool linear = false;

  RecurrentCell() = default;
  RecurrentCell(const std::string& name, CellType type, int input, int hidden, Rng& rng);

  int gates() const { return type == CellType::kGru ? 3 : 4; }
  int hidden_size() const { return static_cast<int>(w_hidden.value.cols()); }
  int input_size() const { return static_cast<int>(w_input.value.cols()); }

  RecurrentState zero_state(Tape& tape) const;
  RecurrentState step(Tape& tape, Var x, const RecurrentState& state) const;
  void collect(std::vector<Parameter*>& out);
};

}  // namespace airtrack::nn
