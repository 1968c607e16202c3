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

#include "star/cnn_baseline.hpp"

#include <algorithm>
#include <numeric>

#include "star/errors.hpp"
#include "star/rng.hpp"

namespace star {
namespace {

constexpr int kMaps1 = 8;
constexpr int kMaps2 = 16;
constexpr std::uint64_t kCnnInit = 0xc441;
constexpr std::uint64_t kCnnShuffle = 0xc442;

// Channels are stacked along rows: a C-channel h x w map is a C x (h*w) matrix.
Matrix im2col(const Matrix& maps, Index h, Index w) {
  const Index channels = maps.rows();
  Matrix cols(channels * 9, h * w);
  for (Index c = 0; c < channels; ++c) {
    for (Index dy = -1; dy <= 1; ++dy) {
      for (Index dx = -1; dx <= 1; ++dx) {
        const Index row = c * 9 + (dy + 1) * 3 + (dx + 1);
        for (Index y = 0; y < h; ++y) {
          for (Index x = 0; x < w; ++x) {
            const Index sy = y + dy;
            const Index sx = x + dx;
            cols(row, y * w + x) = (sy < 0 || sx < 0 || sy >= h || sx >= w) ? 0.0 : maps(c, sy * w + sx);
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& d_cols, Index channels, Index h, Index w) {
  Matrix d = Matrix::Zero(channels, h * w);
  for (Index c = 0; c < channels; ++c) {
    for (Index dy = -1; dy <= 1; ++dy) {
      for (Index dx = -1; dx <= 1; ++dx) {
        const Index row = c * 9 + (dy + 1) * 3 + (dx + 1);
        for (Index y = 0; y < h; ++y) {
          for (Index x = 0; x < w; ++x) {
            const Index sy = y + dy;
            const Index sx = x + dx;
            if (sy >= 0 && sx >= 0 && sy < h && sx < w) d(c, sy * w + sx) += d_cols(row, y * w + x);
          }
        }
      }
    }
  }
  return d;
}

struct Pooled {
  Matrix out;
  std::vector<Index> argmax;  // flat source index per output cell
};

Pooled max_pool(const Matrix& maps, Index h, Index w) {
  const Index oh = h / 2, ow = w / 2;
  Pooled p;
  p.out.resize(maps.rows(), oh * ow);
  p.argmax.resize(static_cast<std::size_t>(maps.rows() * oh * ow));
  for (Index c = 0; c < maps.rows(); ++c) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        Index best = (2 * y) * w + 2 * x;
        for (Index a = 0; a < 2; ++a)
          for (Index b = 0; b < 2; ++b) {
            const Index idx = (2 * y + a) * w + 2 * x + b;
            if (maps(c, idx) > maps(c, best)) best = idx;
          }
        p.out(c, y * ow + x) = maps(c, best);
        p.argmax[static_cast<std::size_t>(c * oh * ow + y * ow + x)] = best;
      }
    }
  }
  return p;
}

struct Activations {
  Matrix cols1, act1;
  Pooled pool1;
  Matrix cols2, act2;
  Pooled pool2;
  Matrix flat;
  Vector probs;
};

Activations forward(const CnnBaseline& net, const Matrix& input) {
  if (input.rows() != net.rows || input.cols() != net.cols) {
    throw DimensionError("cnn_baseline: input does not match the configured window shape");
  }
  const Index h = net.rows, w = net.cols;
  Activations a;
  Matrix maps(1, h * w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) maps(0, y * w + x) = input(y, x);
  a.cols1 = im2col(maps, h, w);
  a.act1 = relu_forward(linear_forward(net.conv1, a.cols1));
  a.pool1 = max_pool(a.act1, h, w);
  a.cols2 = im2col(a.pool1.out, h / 2, w / 2);
  a.act2 = relu_forward(linear_forward(net.conv2, a.cols2));
  a.pool2 = max_pool(a.act2, h / 2, w / 2);
  a.flat = Eigen::Map<const Matrix>(Matrix(a.pool2.out.transpose()).data(), a.pool2.out.size(), 1);
  a.probs = softmax(linear_forward(net.head, a.flat).col(0));
  return a;
}

Matrix unpool(const Pooled& p, const Matrix& d_out, Index channels, Index in_cells) {
  Matrix d = Matrix::Zero(channels, in_cells);
  const Index cells = d_out.cols();
  for (Index c = 0; c < channels; ++c)
    for (Index i = 0; i < cells; ++i) d(c, p.argmax[static_cast<std::size_t>(c * cells + i)]) += d_out(c, i);
  return d;
}

}  // namespace

CnnBaseline make_cnn_baseline(Index rows, Index cols, int classes, std::uint64_t seed) {
  if (rows < 4 || cols < 4) throw DimensionError("cnn_baseline: window must be at least 4 x 4");
  CnnBaseline net;
  net.rows = rows;
  net.cols = cols;
  net.classes = classes;
  net.conv1 = ParamGroup("cnn_conv1", kMaps1, 9);
  net.conv2 = ParamGroup("cnn_conv2", kMaps2, kMaps1 * 9);
  net.head = ParamGroup("cnn_head", classes, kMaps2 * (rows / 4) * (cols / 4));
  Rng rng = make_stream(seed, {kCnnInit});
  for (ParamGroup* g : net.pointers()) init_glorot(*g, rng);
  return net;
}

Vector cnn_predict(const CnnBaseline& net, const Matrix& input) { return forward(net, input).probs; }

double cnn_accumulate_gradients(CnnBaseline& net, std::span<const Window* const> batch) {
  const Index h = net.rows, w = net.cols;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const Window* win : batch) {
    Activations a = forward(net, win->values);
    loss += cross_entropy(a.probs, win->label) * inv;
    Vector d_logits = a.probs * inv;
    d_logits(win->label) -= inv;
    Matrix d_flat = linear_backward(net.head, a.flat, d_logits);
    // flat is the row-major flatten of pool2 (maps x cells).
    Matrix d_pool2(a.pool2.out.rows(), a.pool2.out.cols());
    for (Index c = 0; c < d_pool2.rows(); ++c)
      for (Index i = 0; i < d_pool2.cols(); ++i) d_pool2(c, i) = d_flat(c * d_pool2.cols() + i, 0);
    Matrix d_act2 = relu_backward(a.act2, unpool(a.pool2, d_pool2, kMaps2, (h / 2) * (w / 2)));
    Matrix d_cols2 = linear_backward(net.conv2, a.cols2, d_act2);
    Matrix d_pool1 = col2im(d_cols2, kMaps1, h / 2, w / 2);
    Matrix d_act1 = relu_backward(a.act1, unpool(a.pool1, d_pool1, kMaps1, h * w));
    linear_backward_params(net.conv1, a.cols1, d_act1);
  }
  return loss;
}

MetricsReport cnn_baseline_train_eval(const std::vector<Window>& train, const std::vector<Window>& test,
                                      const RunConfig& cfg) {
  CnnBaseline net = make_cnn_baseline(cfg.window_length, cfg.channels, cfg.classes, cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto groups = net.pointers();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_stream(cfg.seed, {kCnnShuffle, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const Window*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size)); ++i) {
        batch.push_back(&train[order[i]]);
      }
      for (ParamGroup* g : groups) g->zero_grad();
      cnn_accumulate_gradients(net, batch);
      sgd_step(groups, {cfg.learning_rate, cfg.clip_norm});
    }
  }
  std::vector<int> labels, preds;
  for (const Window& win : test) {
    Vector p = cnn_predict(net, win.values);
    Index best = 0;
    p.maxCoeff(&best);
    labels.push_back(win.label);
    preds.push_back(static_cast<int>(best));
  }
  return compute_metrics(cfg.classes, labels, preds);
}

}  // namespace star
