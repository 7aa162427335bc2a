// Copyright 2026 The ebmrec Authors
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
#include "ebmrec/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "ebmrec/io.hpp"

namespace ebmrec::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("not a valid number: '" + raw + "'");
  return v;
}

double parse_double(const std::string& s) { return parse_number<double>(s); }

std::size_t parse_size(const std::string& s) {
  if (trim(s).starts_with('-')) throw ConfigError("expected a non-negative integer: '" + s + "'");
  return parse_number<std::size_t>(s);
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected a boolean: '" + raw + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

// Enum parsers throw std::invalid_argument; report them as config errors.
template <class F>
auto as_config_error(F f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

struct Key {
  std::string section;  // empty for top-level
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;

  std::string dotted() const { return section.empty() ? name : section + "." + name; }
};

#define EBMREC_NUM(sec, key, field, parse)                                             \
  Key {                                                                                \
    sec, key, [](const ExperimentConfig& c) { return fmt(c.field); },                  \
        [](ExperimentConfig& c, const std::string& v) { c.field = parse(v); }          \
  }
#define EBMREC_STR(sec, key, field)                                                    \
  Key {                                                                                \
    sec, key, [](const ExperimentConfig& c) { return c.field; },                       \
        [](ExperimentConfig& c, const std::string& v) { c.field = trim(v); }           \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      Key{"", "seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
          [](ExperimentConfig& c, const std::string& v) {
            c.seed = parse_number<std::uint64_t>(v);
          }},

      Key{"data", "kind", [](const ExperimentConfig& c) { return to_string(c.data.phantom.kind); },
          [](ExperimentConfig& c, const std::string& v) {
            c.data.phantom.kind = as_config_error([&] { return parse_phantom_kind(trim(v)); });
          }},
      Key{"data", "size", [](const ExperimentConfig& c) { return fmt(c.data.phantom.height); },
          [](ExperimentConfig& c, const std::string& v) {
            c.data.phantom.height = c.data.phantom.width = parse_size(v);
          }},
      EBMREC_NUM("data", "count", data.count, parse_size),
      EBMREC_NUM("data", "min_shapes", data.phantom.min_shapes, parse_size),
      EBMREC_NUM("data", "max_shapes", data.phantom.max_shapes, parse_size),
      EBMREC_NUM("data", "phase_amplitude", data.phantom.phase_amplitude, parse_double),
      EBMREC_NUM("data", "coils", data.coils, parse_size),
      EBMREC_NUM("data", "noise_std", data.noise_std, parse_double),
      EBMREC_STR("data", "manifest", data.manifest),

      EBMREC_NUM("model", "stem_width", model.stem_width, parse_size),
      Key{"model", "widths",
          [](const ExperimentConfig& c) {
            return join(c.model.widths, [](std::size_t w) { return fmt(w); });
          },
          [](ExperimentConfig& c, const std::string& v) {
            c.model.widths.clear();
            for (const auto& s : split_list(v)) c.model.widths.push_back(parse_size(s));
          }},
      Key{"model", "downsample",
          [](const ExperimentConfig& c) {
            return join(c.model.downsample, [](bool b) { return fmt(b); });
          },
          [](ExperimentConfig& c, const std::string& v) {
            c.model.downsample.clear();
            for (const auto& s : split_list(v)) c.model.downsample.push_back(parse_bool(s));
          }},
      EBMREC_NUM("model", "conditional", model.conditional, parse_bool),

      EBMREC_NUM("train", "iterations", train.iterations, parse_size),
      EBMREC_NUM("train", "batch_size", train.batch_size, parse_size),
      EBMREC_NUM("train", "beta", train.beta, parse_double),
      EBMREC_NUM("train", "learning_rate", train.learning_rate, parse_double),
      Key{"train", "noise_amplitudes",
          [](const ExperimentConfig& c) {
            return join(c.train.noise_amplitudes, [](double a) { return fmt(a); });
          },
          [](ExperimentConfig& c, const std::string& v) {
            c.train.noise_amplitudes.clear();
            for (const auto& s : split_list(v)) c.train.noise_amplitudes.push_back(parse_double(s));
          }},
      EBMREC_NUM("train", "langevin_steps", train.langevin_steps, parse_size),
      EBMREC_NUM("train", "langevin_step", train.langevin_step, parse_double),
      EBMREC_NUM("train", "langevin_grad_clip", train.langevin_grad_clip, parse_double),
      EBMREC_NUM("train", "langevin_temperature", train.langevin_temperature, parse_double),
      EBMREC_NUM("train", "clamp_negatives", train.clamp_negatives, parse_bool),
      EBMREC_NUM("train", "buffer_capacity", train.buffer_capacity, parse_size),
      EBMREC_NUM("train", "reuse_probability", train.reuse_probability, parse_double),
      EBMREC_NUM("train", "spectral_norm", train.spectral_norm, parse_bool),
      Key{"train", "sn_iterations",
          [](const ExperimentConfig& c) { return std::to_string(c.train.sn_iterations); },
          [](ExperimentConfig& c, const std::string& v) {
            c.train.sn_iterations = int(parse_size(v));
          }},
      EBMREC_NUM("train", "grad_clip", train.grad_clip, parse_double),
      EBMREC_NUM("train", "augment", train.augment, parse_bool),
      EBMREC_NUM("train", "patch", train.patch, parse_size),
      EBMREC_STR("train", "resume", resume),

      EBMREC_NUM("sample", "levels", sample.levels, parse_size),
      EBMREC_NUM("sample", "sigma_first", sample.sigma_first, parse_double),
      EBMREC_NUM("sample", "sigma_last", sample.sigma_last, parse_double),
      EBMREC_NUM("sample", "eps", sample.eps, parse_double),
      EBMREC_NUM("sample", "steps", sample.steps, parse_size),
      EBMREC_NUM("sample", "temperature", sample.temperature, parse_double),
      EBMREC_NUM("sample", "count", sample.count, parse_size),

      Key{"recon", "mode", [](const ExperimentConfig& c) { return to_string(c.recon.mode); },
          [](ExperimentConfig& c, const std::string& v) {
            c.recon.mode = as_config_error([&] { return parse_recon_mode(trim(v)); });
          }},
      EBMREC_NUM("recon", "lambda", recon.lambda, parse_double),
      Key{"recon", "init", [](const ExperimentConfig& c) { return to_string(c.recon.init); },
          [](ExperimentConfig& c, const std::string& v) {
            c.recon.init = as_config_error([&] { return parse_init_mode(trim(v)); });
          }},
      EBMREC_NUM("recon", "dc_every_step", recon.dc_every_step, parse_bool),
      EBMREC_NUM("recon", "tiled", recon.tiled, parse_bool),
      EBMREC_NUM("recon", "tile", recon.tile, parse_size),
      EBMREC_NUM("recon", "tile_overlap", recon.tile_overlap, parse_size),
      EBMREC_NUM("recon", "cg_tol", recon.cg_tol, parse_double),
      EBMREC_NUM("recon", "cg_max_iter", recon.cg_max_iter, parse_size),
      Key{"recon", "pattern", [](const ExperimentConfig& c) { return to_string(c.recon.pattern); },
          [](ExperimentConfig& c, const std::string& v) {
            c.recon.pattern = as_config_error([&] { return parse_mask_pattern(trim(v)); });
          }},
      EBMREC_NUM("recon", "R", recon.R, parse_double),
      EBMREC_NUM("recon", "center_fraction", recon.center_fraction, parse_double),
      EBMREC_STR("recon", "checkpoint", recon.checkpoint),
      EBMREC_STR("recon", "kspace", recon.kspace),
      EBMREC_STR("recon", "mask", recon.mask),
      EBMREC_STR("recon", "reference", recon.reference),

      EBMREC_STR("output", "dir", output.dir),
      EBMREC_NUM("output", "png", output.png, parse_bool),
      EBMREC_NUM("output", "wallclock", output.wallclock, parse_bool),
  };
  return keys;
}

#undef EBMREC_NUM
#undef EBMREC_STR

const Key* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : registry())
    if (k.section == section && k.name == name) return &k;
  return nullptr;
}

}  // namespace

Architecture ExperimentConfig::architecture() const {
  if (model.widths.size() != model.downsample.size())
    throw ConfigError("model.widths and model.downsample must have the same length");
  Architecture a;
  a.in_channels = model.conditional ? 3 : 2;
  a.stem_width = model.stem_width;
  a.blocks.clear();
  for (std::size_t i = 0; i < model.widths.size(); ++i)
    a.blocks.push_back({model.widths[i], model.downsample[i]});
  return a;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t = train;
  t.arch = architecture();
  return t;
}

NoiseSchedule ExperimentConfig::schedule() const {
  return NoiseSchedule::geometric(sample.sigma_first, sample.sigma_last, sample.levels, sample.eps,
                                  sample.steps);
}

ReconConfig ExperimentConfig::recon_config() const {
  ReconConfig r;
  r.mode = recon.mode;
  r.lambda = recon.lambda;
  r.schedule = schedule();
  r.init = recon.init;
  r.dc_every_step = recon.dc_every_step;
  r.temperature = sample.temperature;
  r.tiled = recon.tiled;
  r.tile = recon.tile;
  r.tile_overlap = recon.tile_overlap;
  r.cg_tol = recon.cg_tol;
  r.cg_max_iter = recon.cg_max_iter;
  return r;
}

void ExperimentConfig::validate() const {
  try {
    train_config().validate();
    recon_config().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const std::size_t n = data.phantom.height;
  if (!is_power_of_two(n)) throw ConfigError("data.size must be a power of two");
  if (n % architecture().downsample_factor() != 0)
    throw ConfigError("data.size must be divisible by the network's downsampling factor");
  if (data.coils == 0) throw ConfigError("data.coils must be >= 1");
  if (!(data.noise_std >= 0.0)) throw ConfigError("data.noise_std must be >= 0");
  if (data.phantom.min_shapes == 0 || data.phantom.min_shapes > data.phantom.max_shapes)
    throw ConfigError("data.min_shapes must be in [1, max_shapes]");
  if (!(recon.R >= 1.0)) throw ConfigError("recon.R must be >= 1");
  if (!(recon.center_fraction >= 0.0 && recon.center_fraction < 1.0))
    throw ConfigError("recon.center_fraction must lie in [0, 1)");
  if (sample.count == 0) throw ConfigError("sample.count must be >= 1");
  if (output.dir.empty()) throw ConfigError("output.dir must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      const Key* k = find_key("", name);
      if (!k) throw ConfigError("unknown top-level key '" + name + "'");
      k->set(c, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) {
      const Key* k = find_key(name, key);
      if (!k) throw ConfigError("unknown config key '" + name + "." + key + "'");
      try {
        k->set(c, leaf.data());
      } catch (const ConfigError& e) {
        throw ConfigError(name + "." + key + ": " + e.what());
      }
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config(text);
}

void set_value(ExperimentConfig& config, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  const std::string section = dot == std::string::npos ? "" : dotted_key.substr(0, dot);
  const std::string name = dot == std::string::npos ? dotted_key : dotted_key.substr(dot + 1);
  const Key* k = find_key(section, name);
  if (!k) throw ConfigError("unknown config key '" + dotted_key + "'");
  try {
    k->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(dotted_key + ": " + e.what());
  }
}

std::string to_ini(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : registry()) {
    if (k.section != section) {
      section = k.section;
      out += "\n[" + section + "]\n";
    }
    out += k.name + " = " + k.get(config) + "\n";
  }
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.dotted());
  return out;
}

}  // namespace ebmrec::cli
