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

#include "star/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "star/errors.hpp"

namespace star {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field int_field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(double RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<double>(k, v);
          },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

Field bool_field(bool RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_bool(k, v);
          },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"window_length", int_field(&RunConfig::window_length)},
      {"channels", int_field(&RunConfig::channels)},
      {"classes", int_field(&RunConfig::classes)},
      {"agents", int_field(&RunConfig::agents)},
      {"episode_length", int_field(&RunConfig::episode_length)},
      {"copies", int_field(&RunConfig::copies)},
      {"enc_glimpse_width", int_field(&RunConfig::enc_glimpse_width)},
      {"enc_loc_width", int_field(&RunConfig::enc_loc_width)},
      {"enc_out_width", int_field(&RunConfig::enc_out_width)},
      {"conv_filters", int_field(&RunConfig::conv_filters)},
      {"core_width", int_field(&RunConfig::core_width)},
      {"variance", real_field(&RunConfig::variance)},
      {"time_variance", real_field(&RunConfig::time_variance)},
      {"n_scales", int_field(&RunConfig::n_scales)},
      {"scale_factor", int_field(&RunConfig::scale_factor)},
      {"learning_rate", real_field(&RunConfig::learning_rate)},
      {"clip_norm", real_field(&RunConfig::clip_norm)},
      {"batch_size", int_field(&RunConfig::batch_size)},
      {"epochs", int_field(&RunConfig::epochs)},
      {"overlap", real_field(&RunConfig::overlap)},
      {"reinforce_weight", real_field(&RunConfig::reinforce_weight)},
      {"reinforce_target",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "action") {
            c.reinforce_target = ReinforceTarget::kActionLogDensity;
          } else if (v == "class") {
            c.reinforce_target = ReinforceTarget::kClassLogLikelihood;
          } else {
            throw ConfigError("config key '" + k + "': expected action or class, got '" + v + "'");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.reinforce_target == ReinforceTarget::kActionLogDensity ? "action"
                                                                                      : "class");
        }}},
      {"use_baseline", bool_field(&RunConfig::use_baseline)},
      {"baseline_decay", real_field(&RunConfig::baseline_decay)},
      {"per_agent_encoders", bool_field(&RunConfig::per_agent_encoders)},
      {"use_encoder", bool_field(&RunConfig::use_encoder)},
      {"use_conv_merge", bool_field(&RunConfig::use_conv_merge)},
      {"use_time_action", bool_field(&RunConfig::use_time_action)},
      {"variant",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.variant = parse_variant(v); },
        [](const RunConfig& c) { return to_string(c.variant); }}},
      {"seed", int_field(&RunConfig::seed)},
      {"workers", int_field(&RunConfig::workers)},
      {"shard_windows", int_field(&RunConfig::shard_windows)},
  };
  return table;
}

}  // namespace

std::string to_string(Variant v) {
  static const char* names[] = {"S1", "S2", "S3", "S4", "S5", "S6"};
  return names[static_cast<int>(v)];
}

Variant parse_variant(const std::string& tag) {
  static const std::map<std::string, Variant> table = {
      {"S1", Variant::S1}, {"S2", Variant::S2}, {"S3", Variant::S3},
      {"S4", Variant::S4}, {"S5", Variant::S5}, {"S6", Variant::S6}};
  auto it = table.find(tag);
  if (it == table.end()) throw ConfigError("unknown ablation variant '" + tag + "' (expected S1..S6)");
  return it->second;
}

GlimpseGeometry RunConfig::glimpse_geometry() const {
  return {base_patch_shape(window_length, channels), n_scales, scale_factor};
}

void RunConfig::validate() const {
  auto positive = [](const char* name, long long v) {
    if (v < 1) throw ConfigError(std::string("config: ") + name + " must be >= 1");
  };
  positive("window_length", window_length);
  positive("channels", channels);
  positive("classes", classes);
  positive("agents", agents);
  positive("episode_length", episode_length);
  positive("copies", copies);
  positive("enc_glimpse_width", enc_glimpse_width);
  positive("enc_loc_width", enc_loc_width);
  positive("enc_out_width", enc_out_width);
  positive("conv_filters", conv_filters);
  positive("core_width", core_width);
  positive("n_scales", n_scales);
  positive("scale_factor", scale_factor);
  positive("batch_size", batch_size);
  positive("workers", workers);
  positive("shard_windows", shard_windows);
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (variance < 0.0) throw ConfigError("config: variance must be >= 0");
  if (learning_rate < 0.0) throw ConfigError("config: learning_rate must be >= 0");
  if (overlap < 0.0 || overlap >= 1.0) throw ConfigError("config: overlap must be in [0, 1)");
  if (baseline_decay < 0.0 || baseline_decay > 1.0) {
    throw ConfigError("config: baseline_decay must be in [0, 1]");
  }
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [name, field] : fields()) os << name << "=" << field.get(cfg) << "\n";
  return os.str();
}

}  // namespace star
