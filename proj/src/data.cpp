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

#include "star/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "star/errors.hpp"
#include "star/rng.hpp"

namespace star {
namespace {

constexpr std::uint64_t kSynthStream = 0x5e7d;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  for (std::string& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

template <typename T>
T parse_cell(const std::string& cell, const std::string& column, std::size_t lineno) {
  T value{};
  const char* first = cell.data();
  const char* last = first + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("column '" + column + "': cannot parse '" + cell + "' as a number", lineno);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ParseError("column '" + column + "': non-finite value", lineno);
  }
  return value;
}

}  // namespace

std::vector<int> Dataset::subjects() const {
  std::set<int> s;
  for (const Recording& r : recordings) s.insert(r.subject);
  return {s.begin(), s.end()};
}

Index window_stride(Index K, double overlap) {
  if (overlap < 0.0 || overlap >= 1.0) throw DomainError("window_stride: overlap must be in [0, 1)");
  const auto stride = static_cast<Index>(std::floor(static_cast<double>(K) * (1.0 - overlap) + 0.5));
  if (stride < 1) throw DomainError("window_stride: stride rounds to zero");
  return stride;
}

Index window_count(Index T, Index K, double overlap) {
  const Index stride = window_stride(K, overlap);
  return T < K ? 0 : (T - K) / stride + 1;
}

std::vector<Window> window_recording(const Recording& rec, Index K, double overlap) {
  const Index stride = window_stride(K, overlap);
  std::vector<Window> out;
  const Index T = rec.samples.rows();
  for (Index start = 0; start + K <= T; start += stride) {
    out.push_back({rec.samples.middleRows(start, K), rec.label, rec.subject});
  }
  return out;
}

std::vector<Window> make_windows(const Dataset& ds, Index K, double overlap) {
  std::vector<Window> out;
  for (const Recording& r : ds.recordings) {
    auto w = window_recording(r, K, overlap);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

ChannelStats compute_channel_stats(const Dataset& train) {
  const Index P = train.channels;
  Vector sum = Vector::Zero(P);
  Vector sq = Vector::Zero(P);
  double count = 0.0;
  for (const Recording& r : train.recordings) {
    sum += r.samples.colwise().sum().transpose();
    count += static_cast<double>(r.samples.rows());
  }
  if (count == 0.0) throw StateError("compute_channel_stats: no samples");
  const Vector mean = sum / count;
  for (const Recording& r : train.recordings) {
    sq += (r.samples.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  Vector stddev = (sq / count).cwiseSqrt().cwiseMax(kStddevFloor);
  return {mean, stddev};
}

Dataset standardize(const Dataset& ds, const ChannelStats& stats) {
  if (ds.standardized()) throw StateError("standardize: dataset is already standardized");
  if (stats.mean.size() != ds.channels || stats.stddev.size() != ds.channels) {
    throw DimensionError("standardize: stats for " + std::to_string(stats.mean.size()) +
                         " channels, dataset has " + std::to_string(ds.channels));
  }
  Dataset out = ds;
  const Eigen::RowVectorXd inv = stats.stddev.cwiseInverse().transpose();
  for (Recording& r : out.recordings) {
    r.samples = ((r.samples.rowwise() - stats.mean.transpose()).array().rowwise() * inv.array()).matrix();
  }
  out.stats = stats;
  return out;
}

std::pair<Dataset, Dataset> loso_split(const Dataset& ds, int held_out) {
  Dataset train = ds;
  Dataset test = ds;
  train.recordings.clear();
  test.recordings.clear();
  for (const Recording& r : ds.recordings) (r.subject == held_out ? test : train).recordings.push_back(r);
  if (test.recordings.empty()) throw LookupError("loso_split: unknown subject " + std::to_string(held_out));
  return {std::move(train), std::move(test)};
}

SynthConfig SynthConfig::defaults() {
  SynthConfig s;
  s.channel_bands = {{0, 6}, {6, 12}, {12, 18}, {18, 24}};
  s.time_bands = {{1, 4}, {6, 9}, {6, 9}, {1, 4}};
  return s;
}

int SynthConfig::stride() const { return static_cast<int>(window_stride(window_length, overlap)); }

Index SynthConfig::recording_length() const {
  return window_length + static_cast<Index>(stride()) * (windows_per_recording - 1);
}

bool SynthConfig::in_band(int label, Index row, Index col) const {
  const Band& cb = channel_bands.at(static_cast<std::size_t>(label));
  const Band& tb = time_bands.at(static_cast<std::size_t>(label));
  const Index phase = row % stride();
  return col >= cb.begin && col < cb.end && phase >= tb.begin && phase < tb.end;
}

Index SynthConfig::band_area(int label) const {
  Index area = 0;
  for (Index r = 0; r < window_length; ++r)
    for (Index c = 0; c < channels; ++c) area += in_band(label, r, c) ? 1 : 0;
  return area;
}

void SynthConfig::validate() const {
  if (classes < 1 || channels < 1 || window_length < 1 || subjects < 1 || recordings_per_class < 1 ||
      windows_per_recording < 1) {
    throw ConfigError("SynthConfig: counts must be >= 1");
  }
  if (static_cast<int>(channel_bands.size()) != classes || static_cast<int>(time_bands.size()) != classes) {
    throw ConfigError("SynthConfig: need one channel band and one time band per class");
  }
  const int st = stride();
  for (int c = 0; c < classes; ++c) {
    const Band& cb = channel_bands[static_cast<std::size_t>(c)];
    const Band& tb = time_bands[static_cast<std::size_t>(c)];
    if (cb.begin < 0 || cb.end > channels || cb.begin >= cb.end) {
      throw ConfigError("SynthConfig: channel band of class " + std::to_string(c) + " outside [0, P)");
    }
    if (tb.begin < 0 || tb.end > st || tb.begin >= tb.end) {
      throw ConfigError("SynthConfig: time band of class " + std::to_string(c) + " outside [0, stride)");
    }
  }
  if (noise_stddev < 0.0) throw ConfigError("SynthConfig: noise_stddev must be >= 0");
  if (period < 0) throw ConfigError("SynthConfig: period must be >= 0");
}

Dataset synth_generate(const SynthConfig& synth, std::uint64_t seed) {
  synth.validate();
  Dataset ds;
  ds.num_classes = synth.classes;
  ds.channels = synth.channels;
  for (int c = 0; c < synth.channels; ++c) ds.channel_names.push_back("ch" + std::to_string(c));

  Rng rng = make_stream(seed, {kSynthStream});
  std::normal_distribution<double> noise(0.0, 1.0);
  const Index T = synth.recording_length();
  const int st = synth.stride();
  for (int subject = 0; subject < synth.subjects; ++subject) {
    for (int label = 0; label < synth.classes; ++label) {
      const Band& cb = synth.channel_bands[static_cast<std::size_t>(label)];
      const Band& tb = synth.time_bands[static_cast<std::size_t>(label)];
      const double width = tb.end - tb.begin;
      for (int r = 0; r < synth.recordings_per_class; ++r) {
        Recording rec;
        rec.id = "s" + std::to_string(subject) + "_c" + std::to_string(label) + "_r" + std::to_string(r);
        rec.subject = subject;
        rec.label = label;
        rec.samples.resize(T, synth.channels);
        for (Index t = 0; t < T; ++t) {
          for (Index p = 0; p < synth.channels; ++p) {
            double v = synth.noise_stddev == 0.0 ? 0.0 : synth.noise_stddev * noise(rng);
            const Index phase = t % st;
            if (p >= cb.begin && p < cb.end && phase >= tb.begin && phase < tb.end) {
              const auto k = static_cast<double>(phase - tb.begin);
              v += synth.amplitude * (synth.period > 0
                                          ? std::cos(2.0 * std::numbers::pi * k / synth.period)
                                          : std::sin(std::numbers::pi * (k + 0.5) / width));
            }
            rec.samples(t, p) = v;
          }
        }
        ds.recordings.push_back(std::move(rec));
      }
    }
  }
  return ds;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "recording" || header[1] != "subject" || header[2] != "label") {
    throw SchemaError("header must start with recording,subject,label and name at least one channel");
  }
  Dataset ds;
  ds.channels = static_cast<Index>(header.size() - 3);
  if (schema.channels > 0 && schema.channels != ds.channels) {
    throw SchemaError("expected " + std::to_string(schema.channels) + " channels, header has " +
                      std::to_string(ds.channels));
  }
  ds.channel_names.assign(header.begin() + 3, header.end());

  std::set<std::string> finished;
  std::vector<std::vector<double>> rows;
  Recording current;
  bool open = false;
  int max_label = -1;
  auto close = [&] {
    if (!open) return;
    current.samples.resize(static_cast<Index>(rows.size()), ds.channels);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (Index j = 0; j < ds.channels; ++j) current.samples(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    finished.insert(current.id);
    ds.recordings.push_back(std::move(current));
    current = Recording{};
    rows.clear();
    open = false;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != ds.channels + 3) {
      throw ParseError("expected " + std::to_string(ds.channels + 3) + " cells, found " +
                           std::to_string(cells.size()),
                       lineno);
    }
    const std::string& id = cells[0];
    if (id.empty()) throw ParseError("empty recording id", lineno);
    const int subject = parse_cell<int>(cells[1], "subject", lineno);
    const int label = parse_cell<int>(cells[2], "label", lineno);
    if (label < 0 || (schema.num_classes > 0 && label >= schema.num_classes)) {
      throw ParseError("unknown label " + std::to_string(label), lineno);
    }
    if (!open || id != current.id) {
      close();
      if (finished.count(id) != 0) throw ParseError("rows of recording '" + id + "' are not contiguous", lineno);
      current.id = id;
      current.subject = subject;
      current.label = label;
      open = true;
    } else if (subject != current.subject || label != current.label) {
      throw ParseError("recording '" + id + "' changes subject or label", lineno);
    }
    std::vector<double> row(static_cast<std::size_t>(ds.channels));
    for (Index j = 0; j < ds.channels; ++j) {
      row[static_cast<std::size_t>(j)] = parse_cell<double>(cells[static_cast<std::size_t>(j + 3)],
                                                            header[static_cast<std::size_t>(j + 3)], lineno);
    }
    rows.push_back(std::move(row));
    max_label = std::max(max_label, label);
  }
  close();
  ds.num_classes = schema.num_classes > 0 ? schema.num_classes : max_label + 1;
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'", 0);
  out << "recording,subject,label";
  for (Index j = 0; j < ds.channels; ++j) {
    out << ',' << (j < static_cast<Index>(ds.channel_names.size()) ? ds.channel_names[static_cast<std::size_t>(j)]
                                                                  : "ch" + std::to_string(j));
  }
  out << '\n';
  char buf[64];
  for (const Recording& r : ds.recordings) {
    for (Index t = 0; t < r.samples.rows(); ++t) {
      out << r.id << ',' << r.subject << ',' << r.label;
      for (Index j = 0; j < r.samples.cols(); ++j) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), r.samples(t, j));
        out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
      }
      out << '\n';
    }
  }
}

}  // namespace star
