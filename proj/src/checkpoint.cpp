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

#include "star/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "star/errors.hpp"

namespace star {
namespace {

constexpr char kMagic[] = "STAR1";

struct TensorRef {
  std::string name;
  Index rows;
  Index cols;
};

void write_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("checkpoint: truncated payload", 0);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) write_f64(out, m(i, j));
}

void read_matrix(std::istream& in, Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = read_f64(in);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << kMagic << "\n";
  std::istringstream cfg(config_to_text(ckpt.params.config));
  // Thread count is a host setting, not part of the model.
  for (std::string line; std::getline(cfg, line);)
    if (!line.starts_with("workers=")) out << "config " << line << "\n";
  for (const ParamGroup& g : ckpt.params.groups) {
    out << "tensor " << g.name << ".weight " << g.rows() << " " << g.cols() << "\n";
    out << "tensor " << g.name << ".bias " << g.bias.size() << " 1\n";
  }
  if (ckpt.stats) {
    out << "tensor stats.mean " << ckpt.stats->mean.size() << " 1\n";
    out << "tensor stats.stddev " << ckpt.stats->stddev.size() << " 1\n";
  }
  out << "end\n";
  for (const ParamGroup& g : ckpt.params.groups) {
    write_matrix(out, g.weight);
    write_matrix(out, g.bias);
  }
  if (ckpt.stats) {
    write_matrix(out, ckpt.stats->mean);
    write_matrix(out, ckpt.stats->stddev);
  }
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != kMagic) throw ParseError("checkpoint: bad magic", 1);

  RunConfig cfg;
  std::vector<TensorRef> tensors;
  while (true) {
    ++lineno;
    if (!std::getline(in, line)) throw ParseError("checkpoint: manifest not terminated", lineno);
    if (line == "end") break;
    if (line.rfind("config ", 0) == 0) {
      const std::string kv = line.substr(7);
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("checkpoint: bad config line", lineno);
      apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    } else if (line.rfind("tensor ", 0) == 0) {
      std::istringstream ls(line.substr(7));
      TensorRef t;
      if (!(ls >> t.name >> t.rows >> t.cols)) throw ParseError("checkpoint: bad tensor line", lineno);
      tensors.push_back(t);
    } else {
      throw ParseError("checkpoint: unexpected manifest line", lineno);
    }
  }

  Checkpoint ckpt;
  ckpt.params = make_model_params(cfg);
  std::size_t next = 0;
  auto expect = [&](const std::string& name, Index rows, Index cols) {
    if (next >= tensors.size() || tensors[next].name != name || tensors[next].rows != rows ||
        tensors[next].cols != cols) {
      throw SchemaError("checkpoint: manifest does not match the model built from its config at '" + name + "'");
    }
    ++next;
  };
  for (const ParamGroup& g : ckpt.params.groups) {
    expect(g.name + ".weight", g.rows(), g.cols());
    expect(g.name + ".bias", g.bias.size(), 1);
  }
  const bool has_stats = next < tensors.size();
  if (has_stats) {
    ChannelStats stats;
    stats.mean.resize(tensors[next].rows);
    expect("stats.mean", stats.mean.size(), 1);
    stats.stddev.resize(stats.mean.size());
    expect("stats.stddev", stats.stddev.size(), 1);
    ckpt.stats = std::move(stats);
  }
  if (next != tensors.size()) throw SchemaError("checkpoint: unexpected trailing tensors");

  for (ParamGroup& g : ckpt.params.groups) {
    read_matrix(in, g.weight);
    Matrix b(g.bias.size(), 1);
    read_matrix(in, b);
    g.bias = b.col(0);
  }
  if (ckpt.stats) {
    Matrix m(ckpt.stats->mean.size(), 1), s(ckpt.stats->stddev.size(), 1);
    read_matrix(in, m);
    read_matrix(in, s);
    ckpt.stats->mean = m.col(0);
    ckpt.stats->stddev = s.col(0);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("checkpoint: trailing bytes", 0);
  return ckpt;
}

}  // namespace star
