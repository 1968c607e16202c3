// Copyright 2026 The STAR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense arithmetic and the differentiable building blocks of the attention
// model. Every primitive works on column batches: a Matrix with one sample
// per column. Backward functions accumulate into ParamGroup gradient buffers
// (never overwrite) and return the gradient with respect to their input.

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace star {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kProbabilityFloor = 1e-12;

struct ParamGroup {
  std::string name;
  Matrix weight;
  Vector bias;
  Matrix grad_weight;
  Vector grad_bias;

  ParamGroup() = default;
  ParamGroup(std::string group_name, Index rows, Index cols);

  Index rows() const { return weight.rows(); }
  Index cols() const { return weight.cols(); }
  Index size() const { return weight.size() + bias.size(); }

  void zero_grad();
  // Flat view over [weight (row-major), bias]; used by checkers and IO.
  double& value_at(Index flat);
  double& grad_at(Index flat);
};

// Uniform in [-r, r], r = sqrt(6 / (fan_in + fan_out)); bias zero.
void init_glorot(ParamGroup& p, std::mt19937_64& rng);

// ---- linear ---------------------------------------------------------------

Matrix linear_forward(const ParamGroup& p, const Matrix& x);
Vector linear_forward(const ParamGroup& p, const Vector& x);
Matrix linear_backward(ParamGroup& p, const Matrix& x, const Matrix& dy);
// Parameter gradients only, for layers whose input needs no gradient.
void linear_backward_params(ParamGroup& p, const Matrix& x, const Matrix& dy);

// ---- relu -----------------------------------------------------------------

Matrix relu_forward(const Matrix& x);
// Masks `dy` where x <= 0. Passing the forward output instead of x is
// equivalent since relu(x) > 0 iff x > 0.
Matrix relu_backward(const Matrix& x, const Matrix& dy);

// ---- lstm -----------------------------------------------------------------

// Column-batched state; each column is one sequence.
struct LstmState {
  Matrix hidden;
  Matrix cell;

  static LstmState zeros(Index width, Index batch);
};

// The LSTM parameter set is a single group: weight is 4W x (input + W)
// acting on [x; h_prev], bias 4W. Gate blocks, top to bottom: input,
// forget, output, candidate.
using LstmParamSet = ParamGroup;

struct LstmCache {
  Matrix joint_input;  // [x; h_prev]
  Matrix cell_prev;
  Matrix gates;        // activated, 4W x batch
  Matrix tanh_cell;
};

struct LstmGradients {
  Matrix input;
  Matrix hidden_prev;
  Matrix cell_prev;
};

LstmParamSet make_lstm(const std::string& name, Index input_width, Index width);
Index lstm_width(const LstmParamSet& p);
Index lstm_input_width(const LstmParamSet& p);
// Glorot weights, zero bias except forget gate bias 1.
void init_lstm(LstmParamSet& p, std::mt19937_64& rng);

LstmState lstm_cell_forward(const LstmParamSet& p, const Matrix& input, const LstmState& state,
                            LstmCache* cache = nullptr);
LstmGradients lstm_cell_backward(LstmParamSet& p, const LstmCache& cache, const Matrix& d_hidden,
                                 const Matrix& d_cell);

// ---- 1 x M convolution ----------------------------------------------------

// Filters span the full input width: weight is F x M, bias F. Each input row
// r produces output row r with out(r, f) = <row_r, filter_f> + bias_f.
Matrix conv_1xM_forward(const ParamGroup& filters, const Matrix& input);
Matrix conv_1xM_backward(ParamGroup& filters, const Matrix& input, const Matrix& d_out);

// ---- softmax / cross-entropy ----------------------------------------------

Vector softmax(const Vector& logits);
Matrix softmax_columns(const Matrix& logits);
// Vector-Jacobian product of column-wise softmax.
Matrix softmax_backward(const Matrix& probs, const Matrix& d_probs);

// -ln(max(pred[label], 1e-12)). Throws IndexError for a bad label.
double cross_entropy(const Vector& pred, Index label);
// Mean over columns.
double cross_entropy(const Matrix& preds, std::span<const int> labels);
// d cross_entropy / d pred. Zero when the floor is active, since the floored
// loss is locally constant.
Vector cross_entropy_grad(const Vector& pred, Index label);

// ---- finite-difference checking -------------------------------------------

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_group;
  Index worst_index = -1;
  std::size_t coordinates = 0;
};

// `objective(true)` evaluates the loss and accumulates analytic gradients into
// the groups' buffers; `objective(false)` only evaluates. grad_check zeroes the
// buffers, takes the analytic gradient once, then perturbs each coordinate by
// +-epsilon. Error per coordinate: |a - n| / max(1, |a|, |n|).
// With max_coords_per_group > 0 an evenly strided subset is probed.
GradCheckResult grad_check(const std::function<double(bool)>& objective,
                           std::span<ParamGroup* const> params, double epsilon,
                           Index max_coords_per_group = 0);

// ---- optimizer ------------------------------------------------------------

struct SgdOptions {
  double learning_rate = 0.05;
  double clip_norm = 10.0;  // <= 0 disables clipping
};

double global_grad_norm(std::span<ParamGroup* const> params);
// theta <- theta - lr * g, with g rescaled to clip_norm when its global norm
// exceeds it. Returns the pre-clip norm.
double sgd_step(std::span<ParamGroup* const> params, const SgdOptions& options);

}  // namespace star
