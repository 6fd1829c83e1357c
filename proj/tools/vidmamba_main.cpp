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

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "vidmamba/harness/ablate.hpp"
#include "vidmamba/harness/bench.hpp"
#include "vidmamba/harness/checks.hpp"
#include "vidmamba/harness/report.hpp"
#include "vidmamba/serialize.hpp"
#include "vidmamba/temporal_mamba.hpp"
#include "vidmamba/train.hpp"

namespace fs = std::filesystem;
using namespace vidmamba;
using harness::CsvTable;
using harness::fmt;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string lengths;
  std::string axis;
  std::size_t repeats = 3;
  std::size_t seeds = 1;
  std::string fault;
  std::vector<std::string> only;
  std::string checkpoint;
  double guidance = std::nan("");
  std::vector<std::string> argv;
};

std::string command_line(const Options& o) {
  std::string s;
  for (const auto& a : o.argv) s += (s.empty() ? "" : " ") + a;
  return s;
}

fs::path out_dir(const Options& o, const std::string& command) {
  fs::path dir = o.out.empty() ? fs::path("runs") / command : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

TrainConfig resolve_config(const Options& o) {
  TrainConfig cfg;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw UsageError("config file '" + o.config + "' does not exist");
    try {
      cfg = load_train_config(o.config);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  if (o.seed_set) cfg.seed = o.seed;
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const Options& o,
                    const std::vector<std::pair<std::string, std::string>>& run_keys,
                    const TrainConfig* cfg) {
  std::string text = "# vidmamba " + command + "\n# command_line = " + command_line(o) + "\n";
  for (const auto& [k, v] : run_keys) text += "# " + k + " = " + v + "\n";
  if (cfg) text += render_train_config(*cfg);
  harness::write_text(dir / "manifest.txt", text);
}

std::vector<std::size_t> parse_lengths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      throw UsageError("--lengths: '" + item + "' is not a positive integer");
    }
    if (pos != item.size() || v == 0) throw UsageError("--lengths: '" + item + "' is not a positive integer");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--lengths: empty list");
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] <= out[i - 1]) throw UsageError("--lengths must be strictly ascending");
  }
  return out;
}

int cmd_verify(const Options& o) {
  if (!o.fault.empty()) {
    if (o.fault != "fuse") throw UsageError("unknown fault '" + o.fault + "' (known: fuse)");
    set_fuse_fault_for_testing(true);
  }
  std::vector<harness::CheckResult> results;
  try {
    results = harness::run_verify(o.seed, o.only);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  const fs::path dir = out_dir(o, "verify");
  CsvTable csv({"check", "status", "value", "threshold", "detail"});
  std::vector<std::string> failed;
  for (const auto& r : results) {
    csv.add_row({r.name, r.passed ? "pass" : "fail", fmt(r.value), fmt(r.threshold), r.detail});
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  value=" << r.value
              << " threshold=" << r.threshold << "  (" << r.detail << ")\n";
    if (!r.passed) failed.push_back(r.name);
  }
  harness::write_text(dir / "verify.csv", csv.str());
  std::string only;
  for (const auto& n : o.only) only += (only.empty() ? "" : ",") + n;
  write_manifest(dir, "verify", o,
                 {{"seed", std::to_string(o.seed)}, {"fault", o.fault}, {"only", only}}, nullptr);
  if (!failed.empty()) {
    std::cout << "failed checks:";
    for (const auto& f : failed) std::cout << ' ' << f;
    std::cout << '\n';
    return kCheckFailure;
  }
  std::cout << "all " << results.size() << " checks passed\n";
  return kOk;
}

int cmd_bench(const Options& o) {
  harness::BenchOptions bo;
  if (!o.lengths.empty()) bo.lengths = parse_lengths(o.lengths);
  bo.repeats = o.repeats;
  bo.seed = o.seed;
  if (bo.repeats < 1) throw UsageError("--repeats must be positive");
  const fs::path dir = out_dir(o, "bench");
  const auto r = harness::run_bench(bo);
  CsvTable csv({"kernel", "length", "median_seconds"});
  harness::Series scan{"selective scan", {}, {}}, attn{"attention", {}, {}};
  for (const auto& p : r.points) {
    csv.add_row({p.kernel, std::to_string(p.length), fmt(p.median_seconds)});
    auto& s = p.kernel == "attention" ? attn : scan;
    s.x.push_back(static_cast<double>(p.length));
    s.y.push_back(p.median_seconds);
  }
  auto slope_str = [](double s) { return std::isnan(s) ? std::string("n/a") : fmt(s); };
  CsvTable slopes({"kernel", "loglog_slope"});
  slopes.add_row({"selective_scan", slope_str(r.scan_slope)});
  slopes.add_row({"attention", slope_str(r.attention_slope)});
  harness::write_text(dir / "bench.csv", csv.str());
  harness::write_text(dir / "slopes.csv", slopes.str());
  harness::PlotSpec plot{"Wall time vs sequence length", "sequence length", "median seconds",
                         true, true, {scan, attn}, {}};
  harness::write_text(dir / "bench.svg", harness::svg_plot(plot));
  std::string lens;
  for (std::size_t l : bo.lengths) lens += (lens.empty() ? "" : ",") + std::to_string(l);
  write_manifest(dir, "bench", o,
                 {{"lengths", lens}, {"repeats", std::to_string(bo.repeats)},
                  {"warmup", std::to_string(bo.warmup)}, {"seed", std::to_string(o.seed)}},
                 nullptr);
  std::cout << "selective_scan slope " << slope_str(r.scan_slope) << "\nattention slope "
            << slope_str(r.attention_slope) << "\n";
  return kOk;
}

int cmd_ablate(const Options& o) {
  if (o.axis.empty()) throw UsageError("ablate needs --axis (depth, rank, padding, phi)");
  try {
    harness::ablation_values(o.axis);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  if (o.seeds < 1) throw UsageError("--seeds must be positive");
  const TrainConfig base = resolve_config(o);
  harness::AblationOptions ao;
  ao.seeds.clear();
  for (std::size_t i = 0; i < o.seeds; ++i) ao.seeds.push_back(base.seed + i);
  const fs::path dir = out_dir(o, "ablate");
  const auto rows = harness::run_ablation(base, o.axis, ao, [](const harness::AblationRow& r) {
    std::cout << r.axis << "=" << r.value << " seed " << r.seed << ": val " << r.validation_loss
              << ", round trip " << r.round_trip_error << " (" << r.seconds << " s)\n";
  });
  CsvTable csv({"axis", "value", "seed", "final_loss", "validation_loss", "round_trip_error"});
  const auto values = harness::ablation_values(o.axis);
  std::vector<harness::Series> series;
  for (std::uint64_t seed : ao.seeds) series.push_back({"seed " + std::to_string(seed), {}, {}});
  for (const auto& r : rows) {
    csv.add_row({r.axis, r.value, std::to_string(r.seed), fmt(r.final_loss),
                 fmt(r.validation_loss), fmt(r.round_trip_error)});
    const auto vi = std::find(values.begin(), values.end(), r.value) - values.begin();
    auto& s = series[r.seed - base.seed];
    s.x.push_back(static_cast<double>(vi));
    s.y.push_back(r.validation_loss);
  }
  harness::write_text(dir / ("ablate_" + o.axis + ".csv"), csv.str());
  harness::PlotSpec plot{"Validation loss by " + o.axis, o.axis, "validation loss", false, false,
                         series, values};
  harness::write_text(dir / ("ablate_" + o.axis + ".svg"), harness::svg_plot(plot));
  write_manifest(dir, "ablate", o, {{"axis", o.axis}, {"seeds", std::to_string(o.seeds)}}, &base);
  return kOk;
}

int cmd_train(const Options& o) {
  const TrainConfig cfg = resolve_config(o);
  const fs::path dir = out_dir(o, "train");
  write_manifest(dir, "train", o, {}, &cfg);
  ToyDenoiser model = make_model(cfg);
  CsvTable csv({"step", "loss"});
  const TrainResult r = train(cfg, model, [&csv](std::size_t step, double loss) {
    csv.add_row({std::to_string(step), fmt(loss)});
    if (step % 50 == 0) std::cout << "step " << step << " loss " << loss << "\n";
  });
  harness::write_text(dir / "loss.csv", csv.str());
  save_archive(dir / "checkpoint.vmarch", model.checkpoint());
  const double val = validation_loss(cfg, model);
  CsvTable summary({"initial_smoothed_loss", "final_smoothed_loss", "validation_loss"});
  summary.add_row({fmt(r.initial_smoothed), fmt(r.final_smoothed), fmt(val)});
  harness::write_text(dir / "summary.csv", summary.str());
  harness::Series s{"training loss", {}, {}};
  for (std::size_t i = 0; i < r.losses.size(); ++i) {
    s.x.push_back(static_cast<double>(i));
    s.y.push_back(r.losses[i]);
  }
  harness::PlotSpec plot{"Training loss", "step", "loss", false, true, {s}, {}};
  harness::write_text(dir / "loss.svg", harness::svg_plot(plot));
  std::cout << "smoothed loss " << r.initial_smoothed << " -> " << r.final_smoothed
            << ", validation " << val << "\n";
  return kOk;
}

int cmd_sample(const Options& o) {
  TrainConfig cfg = resolve_config(o);
  if (!std::isnan(o.guidance)) cfg.guidance_scale = o.guidance;
  ToyDenoiser model = make_model(cfg);
  if (!o.checkpoint.empty()) {
    if (!fs::exists(o.checkpoint)) throw UsageError("checkpoint '" + o.checkpoint + "' does not exist");
    model.load(load_archive(o.checkpoint));
  }
  const fs::path dir = out_dir(o, "sample");
  write_manifest(dir, "sample", o,
                 {{"checkpoint", o.checkpoint}, {"guidance_scale", fmt(cfg.guidance_scale)}}, &cfg);
  CsvTable csv({"class", "file", "mean", "std"});
  for (std::size_t c = 0; c < kMotionClasses; ++c) {
    const auto label = static_cast<MotionClass>(c);
    const Tensor v = sample_video(cfg, model, label, cfg.guidance_scale, 100 + c);
    const std::string file = "sample_" + std::string(to_string(label)) + ".vmt";
    save_tensor(dir / file, v);
    const double mean = sum(v) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v.data()) var += (x - mean) * (x - mean);
    csv.add_row({std::string(to_string(label)), file, fmt(mean),
                 fmt(std::sqrt(var / static_cast<double>(v.size())))});
  }
  harness::write_text(dir / "samples.csv", csv.str());
  std::cout << "wrote " << kMotionClasses << " samples to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  o.argv.assign(argv, argv + argc);
  CLI::App app{"vidmamba: temporal Mamba and bypass attention toolkit"};
  app.require_subcommand(1);
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&o](std::uint64_t s) { o.seed = s, o.seed_set = true; }, "RNG seed");
    sub->add_option("--out", o.out, "Output directory");
  };
  auto* verify = app.add_subcommand("verify", "Run every oracle suite");
  add_common(verify);
  verify->add_option("--fault", o.fault, "Inject a named fault (test hook): fuse");
  verify->add_option("--only", o.only, "Run only these checks (comma-separated)")->delimiter(',');
  auto* bench = app.add_subcommand("bench", "Time selective scan against attention");
  add_common(bench);
  bench->add_option("--lengths", o.lengths, "Comma-separated ascending sequence lengths");
  bench->add_option("--repeats", o.repeats, "Timed repeats per length (median reported)");
  auto* ablate = app.add_subcommand("ablate", "Train the toy model across one axis");
  add_common(ablate);
  ablate->add_option("--axis", o.axis, "depth | rank | padding | phi");
  ablate->add_option("--config", o.config, "Base training config");
  ablate->add_option("--seeds", o.seeds, "Number of consecutive seeds per value");
  auto* train_cmd = app.add_subcommand("train", "Train the toy video denoiser");
  add_common(train_cmd);
  train_cmd->add_option("--config", o.config, "Training config (key = value)");
  auto* sample = app.add_subcommand("sample", "Sample videos with DDIM and guidance");
  add_common(sample);
  sample->add_option("--config", o.config, "Training config (key = value)");
  sample->add_option("--checkpoint", o.checkpoint, "Checkpoint archive from train");
  sample->add_option("--guidance", o.guidance, "Classifier-free guidance scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  try {
    if (*verify) return cmd_verify(o);
    if (*bench) return cmd_bench(o);
    if (*ablate) return cmd_ablate(o);
    if (*train_cmd) return cmd_train(o);
    if (*sample) return cmd_sample(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailure;
  }
  return kUsage;
}
