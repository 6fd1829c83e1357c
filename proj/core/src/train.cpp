// Copyright 2026 The vidmamba Authors.
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

#include "vidmamba/train.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vidmamba/optim.hpp"

namespace vidmamba {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number(T TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*m = parse_number<T>(k, v);
          },
          [m](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*m);
            else return std::to_string(c.*m);
          }};
}

template <typename Sub, typename T>
Field nested(Sub TrainConfig::*s, T Sub::*m) {
  return {[s, m](TrainConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*s).*m = parse_bool(k, v);
            else (c.*s).*m = parse_number<T>(k, v);
          },
          [s, m](const TrainConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string((c.*s).*m ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return format_double((c.*s).*m);
            else return std::to_string((c.*s).*m);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    m["seed"] = number(&TrainConfig::seed);
    m["steps"] = number(&TrainConfig::steps);
    m["lr"] = number(&TrainConfig::lr);
    m["batch"] = number(&TrainConfig::batch);
    m["cond_drop"] = number(&TrainConfig::cond_drop);
    m["schedule_steps"] = number(&TrainConfig::schedule_steps);
    m["beta_start"] = number(&TrainConfig::beta_start);
    m["beta_end"] = number(&TrainConfig::beta_end);
    m["sample_steps"] = number(&TrainConfig::sample_steps);
    m["guidance_scale"] = number(&TrainConfig::guidance_scale);
    m["val_draws"] = number(&TrainConfig::val_draws);
    m["smooth_window"] = number(&TrainConfig::smooth_window);
    m["frames"] = nested(&TrainConfig::data, &DatasetSpec::frames);
    m["size"] = nested(&TrainConfig::data, &DatasetSpec::size);
    m["channels"] = nested(&TrainConfig::data, &DatasetSpec::channels);
    m["per_class"] = nested(&TrainConfig::data, &DatasetSpec::per_class);
    m["width"] = nested(&TrainConfig::model, &DenoiserConfig::width);
    m["cond_dim"] = nested(&TrainConfig::model, &DenoiserConfig::cond_dim);
    m["time_dim"] = nested(&TrainConfig::model, &DenoiserConfig::time_dim);
    m["depth"] = nested(&TrainConfig::model, &DenoiserConfig::depth);
    m["state_dim"] = nested(&TrainConfig::model, &DenoiserConfig::state_dim);
    m["use_bypass"] = nested(&TrainConfig::model, &DenoiserConfig::use_bypass);
    m["freeze_backbone"] = nested(&TrainConfig::model, &DenoiserConfig::freeze_backbone);
    m["rank"] = {[](TrainConfig& c, const std::string& k, const std::string& v) {
                   c.model.bypass.rank = parse_number<std::size_t>(k, v);
                 },
                 [](const TrainConfig& c) { return std::to_string(c.model.bypass.rank); }};
    m["phi"] = {[](TrainConfig& c, const std::string& k, const std::string& v) {
                  c.model.bypass.phi = parse_number<double>(k, v);
                },
                [](const TrainConfig& c) { return format_double(c.model.bypass.phi); }};
    m["phi_mode"] = {[](TrainConfig& c, const std::string&, const std::string& v) {
                       c.model.bypass.phi_mode = parse_phi_mode(v);
                     },
                     [](const TrainConfig& c) {
                       return std::string(to_string(c.model.bypass.phi_mode));
                     }};
    m["padding"] = {[](TrainConfig& c, const std::string&, const std::string& v) {
                      c.model.padding = parse_padding_mode(v);
                    },
                    [](const TrainConfig& c) { return std::string(to_string(c.model.padding)); }};
    m["placement"] = {[](TrainConfig& c, const std::string&, const std::string& v) {
                        c.model.placement = parse_placement(v);
                      },
                      [](const TrainConfig& c) {
                        return std::string(to_string(c.model.placement));
                      }};
    return m;
  }();
  return f;
}

Tensor embedding_for(const TrainConfig& cfg, MotionClass label) {
  return condition_embedding(label, cfg.model.cond_dim);
}

}  // namespace

void TrainConfig::validate() const {
  data.validate();
  model.validate();
  if (model.channels != data.channels) throw ConfigError("model channels must match data");
  if (model.cond_dim < kMotionClasses) throw ConfigError("cond_dim must be at least 3");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch < 1) throw ConfigError("batch must be positive");
  if (!(cond_drop >= 0.0 && cond_drop <= 1.0)) throw ConfigError("cond_drop must be in [0, 1]");
  if (sample_steps < 1 || sample_steps > schedule_steps) {
    throw ConfigError("sample_steps must be in [1, schedule_steps]");
  }
  if (val_draws < 1 || smooth_window < 1) throw ConfigError("val_draws and smooth_window >= 1");
  (void)schedule();
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
    it->second.set(cfg, key, value);
  }
  cfg.model.channels = cfg.data.channels;
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_train_config(ss.str());
}

std::string render_train_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

double smoothed_head(const std::vector<double>& losses, std::size_t window) {
  const std::size_t n = std::min(window, losses.size());
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += losses[i];
  return s / static_cast<double>(n);
}

double smoothed_tail(const std::vector<double>& losses, std::size_t window) {
  const std::size_t n = std::min(window, losses.size());
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = losses.size() - n; i < losses.size(); ++i) s += losses[i];
  return s / static_cast<double>(n);
}

ToyDenoiser make_model(const TrainConfig& cfg) {
  Rng rng(cfg.seed, 0);
  DenoiserConfig m = cfg.model;
  m.channels = cfg.data.channels;
  return ToyDenoiser(m, rng);
}

std::vector<VideoSample> training_set(const TrainConfig& cfg) {
  Rng rng(cfg.seed, 1);
  return make_synthetic_dataset(cfg.data, rng);
}

std::vector<VideoSample> validation_set(const TrainConfig& cfg) {
  Rng rng(cfg.seed, 3);
  return make_synthetic_dataset(cfg.data, rng);
}

EpsPredictor predictor(const ToyDenoiser& model) {
  return [&model](const Tensor& z, std::size_t t, const Tensor& c) {
    return model.predict(z, t, c);
  };
}

TrainResult train(const TrainConfig& cfg, ToyDenoiser& model,
                  const std::function<void(std::size_t, double)>& on_step) {
  cfg.validate();
  const DiffusionSchedule schedule = cfg.schedule();
  const auto data = training_set(cfg);
  const Tensor null_c = null_embedding(cfg.model.cond_dim);
  Rng rng(cfg.seed, 2);
  TrainResult result;
  if (cfg.steps == 0) return result;
  Adam opt(model.collect(), {.lr = cfg.lr});
  const EpsModel eps_model = [&model](const Var& z, std::size_t t, const Tensor& c) {
    return model.forward(z, t, c);
  };
  result.losses.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    opt.zero_grad();
    Var total;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const VideoSample& s = data[rng.below(data.size())];
      const bool drop = rng.uniform() < cfg.cond_drop;
      const Tensor c = drop ? null_c : embedding_for(cfg, s.label);
      const Var l = training_loss(eps_model, s.video, c, schedule, rng);
      total = b == 0 ? l : ad::add(total, l);
    }
    if (cfg.batch > 1) total = ad::scale(total, 1.0 / static_cast<double>(cfg.batch));
    const double loss = total.value()[0];
    if (!std::isfinite(loss)) {
      throw NumericError("training loss became non-finite at step " + std::to_string(step));
    }
    backward(total);
    opt.step();
    result.losses.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  result.initial_smoothed = smoothed_head(result.losses, cfg.smooth_window);
  result.final_smoothed = smoothed_tail(result.losses, cfg.smooth_window);
  return result;
}

double validation_loss(const TrainConfig& cfg, const ToyDenoiser& model) {
  const DiffusionSchedule schedule = cfg.schedule();
  const auto data = validation_set(cfg);
  Rng rng(cfg.seed, 4);
  const std::size_t draws = cfg.val_draws;
  double total = 0.0;
  std::size_t n = 0;
  for (const VideoSample& s : data) {
    const Tensor c = embedding_for(cfg, s.label);
    for (std::size_t j = 0; j < draws; ++j) {
      // Stratified timesteps: one per equal slice of [1, T].
      const std::size_t slice = schedule.steps() / draws;
      const std::size_t t = 1 + j * slice + static_cast<std::size_t>(rng.below(std::max<std::size_t>(slice, 1)));
      const Tensor eps = rng.normal_tensor(s.video.shape());
      const Tensor z = forward_diffuse(s.video, std::min(t, schedule.steps()), schedule, eps);
      const Tensor pred = model.predict(z, std::min(t, schedule.steps()), c);
      double se = 0.0;
      for (std::size_t i = 0; i < eps.size(); ++i) se += (pred[i] - eps[i]) * (pred[i] - eps[i]);
      total += se / static_cast<double>(eps.size());
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

double round_trip_error(const TrainConfig& cfg, const ToyDenoiser& model, std::size_t videos) {
  const DiffusionSchedule schedule = cfg.schedule();
  const auto data = validation_set(cfg);
  const EpsPredictor f = predictor(model);
  double total = 0.0;
  const std::size_t n = std::min(videos, data.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor c = embedding_for(cfg, data[i].label);
    const Tensor z_T = ddim_invert(f, data[i].video, c, schedule, cfg.sample_steps);
    const Tensor rec = ddim_sample(f, z_T, c, schedule, cfg.sample_steps);
    total += frobenius_norm(rec - data[i].video) / frobenius_norm(data[i].video);
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

Tensor sample_video(const TrainConfig& cfg, const ToyDenoiser& model, MotionClass label,
                    double guidance_scale, std::uint64_t stream) {
  const DiffusionSchedule schedule = cfg.schedule();
  Rng rng(cfg.seed, stream);
  const Tensor z_T = rng.normal_tensor(
      {cfg.data.frames, cfg.data.channels, cfg.data.size, cfg.data.size});
  const Tensor null_c = null_embedding(cfg.model.cond_dim);
  const ValueRange data_range{0.0, 1.0};
  return ddim_sample(predictor(model), z_T, embedding_for(cfg, label), schedule,
                     cfg.sample_steps, &null_c, guidance_scale, &data_range);
}

}  // namespace vidmamba
