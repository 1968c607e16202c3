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

#include "star/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "star/errors.hpp"

namespace star {
namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricsReport compute_metrics(int classes, std::vector<std::int64_t> confusion) {
  if (classes < 1 || confusion.size() != static_cast<std::size_t>(classes * classes)) {
    throw DimensionError("compute_metrics: confusion must be C x C");
  }
  MetricsReport r;
  r.classes = classes;
  r.confusion = std::move(confusion);
  std::int64_t correct = 0;
  for (int i = 0; i < classes; ++i) {
    std::int64_t tp = r.count(i, i);
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < classes; ++j) {
      row += r.count(i, j);
      col += r.count(j, i);
    }
    correct += tp;
    r.total += row;
    const double p = ratio(static_cast<double>(tp), static_cast<double>(col));
    const double rc = ratio(static_cast<double>(tp), static_cast<double>(row));
    r.class_precision.push_back(p);
    r.class_recall.push_back(rc);
    r.class_f1.push_back(ratio(2.0 * p * rc, p + rc));
  }
  for (int i = 0; i < classes; ++i) {
    r.precision += r.class_precision[static_cast<std::size_t>(i)] / classes;
    r.recall += r.class_recall[static_cast<std::size_t>(i)] / classes;
    r.f1 += r.class_f1[static_cast<std::size_t>(i)] / classes;
  }
  r.accuracy = ratio(static_cast<double>(correct), static_cast<double>(r.total));
  return r;
}

MetricsReport compute_metrics(int classes, std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) throw DimensionError("compute_metrics: length mismatch");
  std::vector<std::int64_t> confusion(static_cast<std::size_t>(classes * classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes || predictions[i] < 0 || predictions[i] >= classes) {
      throw IndexError("compute_metrics: class index out of range");
    }
    ++confusion[static_cast<std::size_t>(labels[i] * classes + predictions[i])];
  }
  return compute_metrics(classes, std::move(confusion));
}

std::string metrics_to_text(const MetricsReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "accuracy=" << report.accuracy << "\n"
     << "precision=" << report.precision << "\n"
     << "recall=" << report.recall << "\n"
     << "f1=" << report.f1 << "\n"
     << "total=" << report.total << "\n"
     << "classes=" << report.classes << "\n"
     << "confusion=";
  for (std::size_t i = 0; i < report.confusion.size(); ++i) os << (i ? "," : "") << report.confusion[i];
  os << "\n";
  return os.str();
}

std::string metrics_to_table(const MetricsReport& report) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "accuracy  %.4f\nprecision %.4f\nrecall    %.4f\nf1        %.4f\n",
                report.accuracy, report.precision, report.recall, report.f1);
  os << buf << "confusion (rows: true, cols: predicted)\n";
  for (int i = 0; i < report.classes; ++i) {
    for (int j = 0; j < report.classes; ++j) {
      std::snprintf(buf, sizeof(buf), "%6lld", static_cast<long long>(report.count(i, j)));
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace star
