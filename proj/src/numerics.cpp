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

#include "star/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "star/errors.hpp"

namespace star {
namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_input(const char* op, const ParamGroup& p, const Matrix& x) {
  if (x.rows() != p.cols()) {
    throw DimensionError(std::string(op) + ": " + p.name + " weight " + shape(p.weight) +
                         " cannot take input " + shape(x));
  }
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

ParamGroup::ParamGroup(std::string group_name, Index rows, Index cols)
    : name(std::move(group_name)),
      weight(Matrix::Zero(rows, cols)),
      bias(Vector::Zero(rows)),
      grad_weight(Matrix::Zero(rows, cols)),
      grad_bias(Vector::Zero(rows)) {}

void ParamGroup::zero_grad() {
  grad_weight.setZero();
  grad_bias.setZero();
}

double& ParamGroup::value_at(Index flat) {
  if (flat < 0 || flat >= size()) throw IndexError("value_at: " + std::to_string(flat) + " outside " + name);
  if (flat < weight.size()) return weight(flat / weight.cols(), flat % weight.cols());
  return bias(flat - weight.size());
}

double& ParamGroup::grad_at(Index flat) {
  if (flat < 0 || flat >= size()) throw IndexError("grad_at: " + std::to_string(flat) + " outside " + name);
  if (flat < grad_weight.size()) return grad_weight(flat / grad_weight.cols(), flat % grad_weight.cols());
  return grad_bias(flat - grad_weight.size());
}

void init_glorot(ParamGroup& p, std::mt19937_64& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(p.rows() + p.cols()));
  std::uniform_real_distribution<double> dist(-r, r);
  // Row-major fill so the draw order matches the serialized layout.
  for (Index i = 0; i < p.rows(); ++i)
    for (Index j = 0; j < p.cols(); ++j) p.weight(i, j) = dist(rng);
  p.bias.setZero();
}

Matrix linear_forward(const ParamGroup& p, const Matrix& x) {
  require_input("linear_forward", p, x);
  Matrix y = p.weight * x;
  y.colwise() += p.bias;
  return y;
}

Vector linear_forward(const ParamGroup& p, const Vector& x) {
  if (x.size() != p.cols()) {
    throw DimensionError("linear_forward: " + p.name + " weight " + shape(p.weight) +
                         " cannot take input of length " + std::to_string(x.size()));
  }
  return p.weight * x + p.bias;
}

void linear_backward_params(ParamGroup& p, const Matrix& x, const Matrix& dy) {
  require_input("linear_backward", p, x);
  if (dy.rows() != p.rows() || dy.cols() != x.cols()) {
    throw DimensionError("linear_backward: " + p.name + " upstream " + shape(dy) +
                         " does not match output " + std::to_string(p.rows()) + "x" +
                         std::to_string(x.cols()));
  }
  p.grad_weight.noalias() += dy * x.transpose();
  p.grad_bias += dy.rowwise().sum();
}

Matrix linear_backward(ParamGroup& p, const Matrix& x, const Matrix& dy) {
  linear_backward_params(p, x, dy);
  return p.weight.transpose() * dy;
}

Matrix relu_forward(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  if (x.rows() != dy.rows() || x.cols() != dy.cols()) {
    throw DimensionError("relu_backward: input " + shape(x) + " vs upstream " + shape(dy));
  }
  return (x.array() > 0.0).select(dy, 0.0);
}

LstmState LstmState::zeros(Index width, Index batch) {
  return {Matrix::Zero(width, batch), Matrix::Zero(width, batch)};
}

LstmParamSet make_lstm(const std::string& name, Index input_width, Index width) {
  return ParamGroup(name, 4 * width, input_width + width);
}

Index lstm_width(const LstmParamSet& p) { return p.rows() / 4; }
Index lstm_input_width(const LstmParamSet& p) { return p.cols() - lstm_width(p); }

void init_lstm(LstmParamSet& p, std::mt19937_64& rng) {
  init_glorot(p, rng);
  const Index w = lstm_width(p);
  p.bias.segment(w, w).setConstant(1.0);
}

LstmState lstm_cell_forward(const LstmParamSet& p, const Matrix& input, const LstmState& state,
                            LstmCache* cache) {
  const Index w = lstm_width(p);
  const Index n = input.cols();
  if (input.rows() != lstm_input_width(p) || state.hidden.rows() != w || state.cell.rows() != w ||
      state.hidden.cols() != n || state.cell.cols() != n) {
    throw DimensionError("lstm_cell_forward: " + p.name + " expects input " +
                         std::to_string(lstm_input_width(p)) + " and state " + std::to_string(w) +
                         ", got input " + shape(input) + " hidden " + shape(state.hidden) +
                         " cell " + shape(state.cell));
  }
  Matrix joint(input.rows() + w, n);
  joint.topRows(input.rows()) = input;
  joint.bottomRows(w) = state.hidden;

  Matrix gates = p.weight * joint;
  gates.colwise() += p.bias;
  gates.topRows(3 * w) = gates.topRows(3 * w).unaryExpr(&sigmoid);
  gates.bottomRows(w) = gates.bottomRows(w).array().tanh();

  LstmState next;
  next.cell = gates.middleRows(w, w).cwiseProduct(state.cell) +
              gates.topRows(w).cwiseProduct(gates.bottomRows(w));
  Matrix tanh_cell = next.cell.array().tanh();
  next.hidden = gates.middleRows(2 * w, w).cwiseProduct(tanh_cell);

  if (cache != nullptr) {
    cache->joint_input = std::move(joint);
    cache->cell_prev = state.cell;
    cache->gates = std::move(gates);
    cache->tanh_cell = std::move(tanh_cell);
  }
  return next;
}

LstmGradients lstm_cell_backward(LstmParamSet& p, const LstmCache& cache, const Matrix& d_hidden,
                                 const Matrix& d_cell) {
  const Index w = lstm_width(p);
  const auto in_gate = cache.gates.topRows(w).array();
  const auto forget = cache.gates.middleRows(w, w).array();
  const auto out_gate = cache.gates.middleRows(2 * w, w).array();
  const auto cand = cache.gates.bottomRows(w).array();
  const auto tc = cache.tanh_cell.array();

  const Eigen::ArrayXXd dc = d_cell.array() + d_hidden.array() * out_gate * (1.0 - tc * tc);

  Matrix d_pre(4 * w, d_hidden.cols());
  d_pre.topRows(w) = (dc * cand * in_gate * (1.0 - in_gate)).matrix();
  d_pre.middleRows(w, w) = (dc * cache.cell_prev.array() * forget * (1.0 - forget)).matrix();
  d_pre.middleRows(2 * w, w) = (d_hidden.array() * tc * out_gate * (1.0 - out_gate)).matrix();
  d_pre.bottomRows(w) = (dc * in_gate * (1.0 - cand * cand)).matrix();

  p.grad_weight.noalias() += d_pre * cache.joint_input.transpose();
  p.grad_bias += d_pre.rowwise().sum();
  Matrix d_joint = p.weight.transpose() * d_pre;

  const Index in_width = cache.joint_input.rows() - w;
  return {d_joint.topRows(in_width), d_joint.bottomRows(w), (dc * forget).matrix()};
}

Matrix conv_1xM_forward(const ParamGroup& filters, const Matrix& input) {
  if (input.cols() != filters.cols()) {
    throw DimensionError("conv_1xM_forward: " + filters.name + " filter width " +
                         std::to_string(filters.cols()) + " does not span input " + shape(input));
  }
  Matrix out = input * filters.weight.transpose();
  out.rowwise() += filters.bias.transpose();
  return out;
}

Matrix conv_1xM_backward(ParamGroup& filters, const Matrix& input, const Matrix& d_out) {
  if (input.cols() != filters.cols() || d_out.rows() != input.rows() ||
      d_out.cols() != filters.rows()) {
    throw DimensionError("conv_1xM_backward: input " + shape(input) + " upstream " +
                         shape(d_out) + " filters " + shape(filters.weight));
  }
  filters.grad_weight.noalias() += d_out.transpose() * input;
  filters.grad_bias += d_out.colwise().sum().transpose();
  return d_out * filters.weight;
}

Vector softmax(const Vector& logits) {
  Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index j = 0; j < logits.cols(); ++j) out.col(j) = softmax(logits.col(j));
  return out;
}

Matrix softmax_backward(const Matrix& probs, const Matrix& d_probs) {
  Matrix out(probs.rows(), probs.cols());
  for (Index j = 0; j < probs.cols(); ++j) {
    const double dot = probs.col(j).dot(d_probs.col(j));
    out.col(j) = probs.col(j).cwiseProduct((d_probs.col(j).array() - dot).matrix());
  }
  return out;
}

double cross_entropy(const Vector& pred, Index label) {
  if (label < 0 || label >= pred.size()) {
    throw IndexError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(pred.size()) + ")");
  }
  return -std::log(std::max(pred(label), kProbabilityFloor));
}

double cross_entropy(const Matrix& preds, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != preds.cols()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(preds.cols()) + " predictions");
  }
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (Index j = 0; j < preds.cols(); ++j) total += cross_entropy(Vector(preds.col(j)), labels[j]);
  return total / static_cast<double>(labels.size());
}

Vector cross_entropy_grad(const Vector& pred, Index label) {
  if (label < 0 || label >= pred.size()) {
    throw IndexError("cross_entropy_grad: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(pred.size()) + ")");
  }
  Vector g = Vector::Zero(pred.size());
  if (pred(label) > kProbabilityFloor) g(label) = -1.0 / pred(label);
  return g;
}

GradCheckResult grad_check(const std::function<double(bool)>& objective,
                           std::span<ParamGroup* const> params, double epsilon,
                           Index max_coords_per_group) {
  for (ParamGroup* p : params) p->zero_grad();
  objective(true);

  GradCheckResult result;
  for (ParamGroup* p : params) {
    const Index total = p->size();
    const Index stride =
        (max_coords_per_group > 0 && total > max_coords_per_group) ? total / max_coords_per_group : 1;
    for (Index k = 0; k < total; k += stride) {
      double& v = p->value_at(k);
      const double saved = v;
      v = saved + epsilon;
      const double plus = objective(false);
      v = saved - epsilon;
      const double minus = objective(false);
      v = saved;

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = p->grad_at(k);
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        throw GradCheckError("grad_check: non-finite gradient at " + p->name + "[" +
                             std::to_string(k) + "]");
      }
      const double err = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      ++result.coordinates;
      if (err > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = err;
        result.worst_group = p->name;
        result.worst_index = k;
      }
    }
  }
  return result;
}

double global_grad_norm(std::span<ParamGroup* const> params) {
  double sq = 0.0;
  for (const ParamGroup* p : params) sq += p->grad_weight.squaredNorm() + p->grad_bias.squaredNorm();
  return std::sqrt(sq);
}

double sgd_step(std::span<ParamGroup* const> params, const SgdOptions& options) {
  const double norm = global_grad_norm(params);
  double scale = options.learning_rate;
  if (options.clip_norm > 0.0 && norm > options.clip_norm) scale *= options.clip_norm / norm;
  if (scale == 0.0) return norm;
  for (ParamGroup* p : params) {
    p->weight -= scale * p->grad_weight;
    p->bias -= scale * p->grad_bias;
  }
  return norm;
}

}  // namespace star
