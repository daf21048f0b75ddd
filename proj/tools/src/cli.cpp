// Copyright 2026 The volprep Authors
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

#include "volprep_cli/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "volprep/anon_detect.hpp"
#include "volprep/anon_sim.hpp"
#include "volprep/foreground.hpp"
#include "volprep/metrics.hpp"
#include "volprep/nifti_io.hpp"
#include "volprep/sampler.hpp"
#include "volprep/version.hpp"
#include "volprep/volume_core.hpp"

namespace volprep::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

class Log {
 public:
  Log(std::ostream& sink, bool quiet, Level level) : sink_(sink), quiet_(quiet), level_(level) {}

  void write(Level level, const std::string& line) {
    if (quiet_ || level > level_) return;
    std::lock_guard lock(mutex_);
    sink_ << "volprep: " << line << '\n';
  }
  void info(const std::string& line) { write(Level::Info, line); }
  void debug(const std::string& line) { write(Level::Debug, line); }
  void warn(const std::string& line) { write(Level::Warn, line); }

 private:
  std::ostream& sink_;
  bool quiet_;
  Level level_;
  std::mutex mutex_;
};

Level parse_level(const std::string& s) {
  if (s == "error") return Level::Error;
  if (s == "warn") return Level::Warn;
  if (s == "info") return Level::Info;
  return Level::Debug;
}

struct GlobalOptions {
  std::string out;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::string log_level = "warn";
  bool quiet = true;
  std::string modality;
};

struct ForegroundOptions {
  std::vector<std::string> inputs;
  std::string threshold_mode = "auto";
  std::optional<double> threshold_value;
  double closing_radius_mm = ForegroundParams{}.closing_radius_mm;
  double min_component_fraction = ForegroundParams{}.min_component_fraction;
  std::string keep = "all-above-fraction";
};

struct DetectOptions {
  std::vector<std::string> inputs;
  DetectionParams params;
};

struct SimulateOptions {
  std::vector<std::string> inputs;
  std::string head_mask;
  std::string scheme = "deface";
  double blur_sigma_mm = AnonScheme{}.blur_sigma_mm;
  double skull_shell_mm = AnonScheme{}.skull_shell_mm;
  FaceRegionParams region;
};

struct EvalOptions {
  std::string manifest;
};

struct SampleOptions {
  std::string input;
  std::string fg;
  std::string anon;
  std::vector<std::size_t> patch_size{192, 192, 192};
  std::size_t count = 1;
  std::uint64_t seed = 0;
  double min_fg_fraction = 0.0;
  std::size_t max_attempts = 1000;
  bool dry_run = false;
};

struct InfoOptions {
  std::vector<std::string> inputs;
};

/// Configuration problem detected after argv parsing; maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string case_id_for(const std::string& path) {
  std::string name = fs::path(path).filename().string();
  for (const char* ext : {".nii.gz", ".nii", ".hdr.gz", ".hdr"}) {
    const std::string e(ext);
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0) {
      name.resize(name.size() - e.size());
      break;
    }
  }
  return name;
}

ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "otsu") return ThresholdMode::Otsu;
  if (s == "fixed-ct") return ThresholdMode::FixedCT;
  return ThresholdMode::Manual;
}

json to_json(const StatsSummary& s) {
  return {{"mean", s.mean},         {"std", s.std},         {"median", s.median},
          {"q1", s.q1},             {"q3", s.q3},           {"whisker_lo", s.whisker_lo},
          {"whisker_hi", s.whisker_hi}, {"n", s.n},         {"n_undefined", s.n_undefined}};
}

json to_json(const Index3& p) { return json::array({p[0], p[1], p[2]}); }

json failure_record(const std::string& case_id, const std::string& input, const std::string& code,
                    const std::string& message) {
  json f;
  f["case_id"] = case_id;
  f["input"] = input;
  f["error_code"] = code;
  f["message"] = message;
  return f;
}

/// Outcome of one batch item.
struct CaseOutcome {
  std::string case_id;
  std::string input;
  json result;
  json failure;
};

/// Runs `process` over the items on `threads` workers. A failing item is
/// recorded and never stops the batch. Output is ordered by case id.
std::vector<CaseOutcome> run_batch(const std::vector<std::pair<std::string, std::string>>& items, unsigned threads,
                                   Log& log, const std::function<json(const std::string&, const std::string&)>& process) {
  std::vector<CaseOutcome> outcomes(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      const auto& [case_id, input] = items[i];
      CaseOutcome& o = outcomes[i];
      o.case_id = case_id;
      o.input = input;
      try {
        o.result = process(case_id, input);
      } catch (const Error& e) {
        o.failure = failure_record(case_id, input, std::string(to_string(e.code())), e.what());
      } catch (const std::exception& e) {
        o.failure = failure_record(case_id, input, "Exception", e.what());
      }
      const std::size_t finished = ++done;
      log.info("[" + std::to_string(finished) + "/" + std::to_string(items.size()) + "] " + case_id +
               (o.failure.is_null() ? " ok" : " failed"));
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(1, items.size()));
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  std::stable_sort(outcomes.begin(), outcomes.end(), [](const CaseOutcome& a, const CaseOutcome& b) {
    return std::tie(a.case_id, a.input) < std::tie(b.case_id, b.input);
  });
  return outcomes;
}

std::vector<std::pair<std::string, std::string>> items_from_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& in : inputs) items.emplace_back(case_id_for(in), in);
  return items;
}

struct Report {
  json config_echo;
  std::vector<CaseOutcome> cases;
  std::optional<json> aggregate;
  json extra_failures = json::array();

  bool any_failure() const {
    if (!extra_failures.empty()) return true;
    return std::any_of(cases.begin(), cases.end(), [](const CaseOutcome& c) { return !c.failure.is_null(); });
  }

  json to_json() const {
    json r;
    r["tool_version"] = std::string(kVersion);
    r["timestamp"] = utc_timestamp();
    r["config_echo"] = config_echo;
    json results = json::array();
    json failures = json::array();
    for (const auto& c : cases) {
      if (c.failure.is_null()) {
        results.push_back(c.result);
      } else {
        failures.push_back(c.failure);
      }
    }
    for (const auto& f : extra_failures) failures.push_back(f);
    r["per_case_results"] = std::move(results);
    if (aggregate) r["aggregate_stats"] = *aggregate;
    r["failures"] = std::move(failures);
    return r;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_report(const fs::path& out_dir, const Report& report) {
  write_text(out_dir / "report.json", report.to_json().dump(2) + "\n");
}

fs::path prepare_output_dir(const std::string& out) {
  const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw ConfigError("output directory " + dir.string() + " cannot be created");
  const fs::path probe = dir / ".volprep-write-probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

Modality modality_hint(const GlobalOptions& g) {
  try {
    return parse_modality(g.modality);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

json global_echo(const GlobalOptions& g, const std::string& subcommand, const fs::path& out_dir) {
  json echo;
  echo["subcommand"] = subcommand;
  echo["output_dir"] = out_dir.string();
  echo["threads"] = g.threads;
  echo["log_level"] = g.log_level;
  echo["modality"] = std::string(to_string(parse_modality(g.modality)));
  return echo;
}

ForegroundParams resolve_foreground(const ForegroundOptions& o, Modality modality) {
  ForegroundParams p = ForegroundParams::defaults_for(modality);
  if (o.threshold_mode != "auto") p.threshold_mode = parse_threshold_mode(o.threshold_mode);
  if (o.threshold_value) {
    p.threshold_value = *o.threshold_value;
  } else if (p.threshold_mode == ThresholdMode::Manual) {
    throw ConfigError("--threshold-mode manual needs --threshold-value");
  }
  p.closing_radius_mm = o.closing_radius_mm;
  p.min_component_fraction = o.min_component_fraction;
  p.keep_components = o.keep == "largest" ? KeepComponents::Largest : KeepComponents::AllAboveFraction;
  return p;
}

void validate_or_config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

// ---- subcommands -----------------------------------------------------------

Report run_foreground(const GlobalOptions& g, const ForegroundOptions& o, const fs::path& out_dir, Log& log) {
  const Modality modality = modality_hint(g);
  const ForegroundParams base = resolve_foreground(o, modality);
  validate_or_config_error([&] { base.validate(); });

  Report report;
  report.config_echo = global_echo(g, "foreground", out_dir);
  report.config_echo["inputs"] = o.inputs;
  report.config_echo["params"] = {{"threshold_mode", o.threshold_mode},
                                  {"threshold_value", o.threshold_value ? json(*o.threshold_value) : json(nullptr)},
                                  {"closing_radius_mm", o.closing_radius_mm},
                                  {"min_component_fraction", o.min_component_fraction},
                                  {"keep_components", o.keep}};

  report.cases = run_batch(items_from_inputs(o.inputs), g.threads, log, [&](const std::string& id, const std::string& in) {
    const auto loaded = nifti::read_volume(in, modality);
    const auto fg = segment_foreground_detailed(loaded.volume, base);
    const fs::path out = out_dir / (id + "_fg.nii.gz");
    nifti::write_mask(fg.mask, loaded.header, out);
    const auto voxels = count_nonzero(fg.mask);
    json r;
    r["case_id"] = id;
    r["input"] = in;
    r["output"] = out.string();
    r["threshold"] = fg.threshold;
    r["foreground_voxels"] = voxels;
    r["foreground_fraction"] = static_cast<double>(voxels) / static_cast<double>(fg.mask.size());
    r["padding_voxels"] = count_nonzero(fg.padding.padding_mask);
    r["padded_fraction"] = fg.padding.padded_fraction;
    r["padding_values"] = fg.padding.padding_values;
    return r;
  });
  return report;
}

Report run_detect(const GlobalOptions& g, const DetectOptions& o, const fs::path& out_dir, Log& log) {
  const Modality modality = modality_hint(g);
  validate_or_config_error([&] { o.params.validate(); });
  const auto& p = o.params;

  Report report;
  report.config_echo = global_echo(g, "detect-anon", out_dir);
  report.config_echo["inputs"] = o.inputs;
  report.config_echo["params"] = {{"zero_tolerance", p.zero_tolerance},
                                  {"min_zero_region_vox", p.min_zero_region_vox},
                                  {"blur_window_vox", p.blur_window_vox},
                                  {"blur_ratio_threshold", p.blur_ratio_threshold},
                                  {"boundary_growth_vox", p.boundary_growth_vox},
                                  {"reference_depth_mm", p.reference_depth_mm},
                                  {"envelope_radius_mm", p.envelope_radius_mm}};

  report.cases = run_batch(items_from_inputs(o.inputs), g.threads, log, [&](const std::string& id, const std::string& in) {
    const auto loaded = nifti::read_volume(in, modality);
    const auto det = detect_anonymization(loaded.volume, p);
    const fs::path out = out_dir / (id + "_anon.nii.gz");
    nifti::write_mask(det.anon_mask, loaded.header, out);
    const auto flagged = count_nonzero(det.anon_mask);
    const auto head = count_nonzero(det.head_mask);
    json r;
    r["case_id"] = id;
    r["input"] = in;
    r["output"] = out.string();
    r["mode_guess"] = std::string(to_string(det.mode_guess));
    r["confidence"] = det.confidence;
    r["flagged_voxels"] = flagged;
    r["flagged_fraction"] = head == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(head);
    r["head_voxels"] = head;
    r["zero_path_voxels"] = det.zero_voxels;
    r["blur_path_voxels"] = det.blur_voxels;
    return r;
  });
  return report;
}

Report run_simulate(const GlobalOptions& g, const SimulateOptions& o, const fs::path& out_dir, Log& log) {
  const Modality modality = modality_hint(g);
  AnonScheme scheme;
  validate_or_config_error([&] {
    scheme.kind = parse_anon_kind(o.scheme);
    scheme.blur_sigma_mm = o.blur_sigma_mm;
    scheme.skull_shell_mm = o.skull_shell_mm;
    scheme.validate();
  });
  if (!o.head_mask.empty() && o.inputs.size() != 1)
    throw ConfigError("--head-mask applies to a single --in volume");
  const std::string tag(to_string(scheme.kind));

  Report report;
  report.config_echo = global_echo(g, "simulate-anon", out_dir);
  report.config_echo["inputs"] = o.inputs;
  report.config_echo["params"] = {{"scheme", tag},
                                  {"blur_sigma_mm", scheme.blur_sigma_mm},
                                  {"skull_shell_mm", scheme.skull_shell_mm},
                                  {"anterior_fraction", o.region.anterior_fraction},
                                  {"inferior_fraction", o.region.inferior_fraction},
                                  {"ear_radius_mm", o.region.ear_radius_mm},
                                  {"head_mask", o.head_mask.empty() ? json(nullptr) : json(o.head_mask)}};

  report.cases = run_batch(items_from_inputs(o.inputs), g.threads, log, [&](const std::string& id, const std::string& in) {
    const auto loaded = nifti::read_volume(in, modality);
    const Mask3D head = o.head_mask.empty()
                            ? segment_foreground(loaded.volume, ForegroundParams::defaults_for(modality))
                            : nifti::read_mask(o.head_mask);
    const auto sim = apply_anonymization(loaded.volume, head, scheme, o.region);
    const fs::path vol_out = out_dir / (id + "_" + tag + ".nii.gz");
    const fs::path mask_out = out_dir / (id + "_" + tag + "_mask.nii.gz");
    nifti::write_volume(sim.volume, loaded.header, vol_out);
    nifti::write_mask(sim.altered_mask, loaded.header, mask_out);
    const auto altered = count_nonzero(sim.altered_mask);
    json r;
    r["case_id"] = id;
    r["input"] = in;
    r["output"] = vol_out.string();
    r["mask_output"] = mask_out.string();
    r["scheme"] = tag;
    r["altered_voxels"] = altered;
    r["head_voxels"] = count_nonzero(head);
    return r;
  });
  return report;
}

struct ManifestLine {
  std::size_t line = 0;
  std::string case_id;
  std::string pred;
  std::string gt;
  std::string error;
};

std::vector<ManifestLine> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return (fp.is_absolute() || base.empty() ? fp : base / fp).string();
  };
  std::vector<ManifestLine> lines;
  std::string text;
  for (std::size_t n = 1; std::getline(in, text); ++n) {
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty() || text[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(text);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    ManifestLine m;
    m.line = n;
    if (fields.size() != 3 || fields[0].empty()) {
      m.case_id = "line " + std::to_string(n);
      m.error = "expected case_id<TAB>pred_path<TAB>gt_path";
    } else {
      m.case_id = fields[0];
      m.pred = resolve(fields[1]);
      m.gt = resolve(fields[2]);
    }
    lines.push_back(std::move(m));
  }
  return lines;
}

Report run_eval(const GlobalOptions& g, const EvalOptions& o, const fs::path& out_dir, Log& log) {
  const auto lines = read_manifest(o.manifest);

  Report report;
  report.config_echo = global_echo(g, "eval", out_dir);
  report.config_echo["manifest"] = o.manifest;

  std::vector<std::pair<std::string, std::string>> items;
  std::vector<const ManifestLine*> by_index;
  for (const auto& l : lines) {
    items.emplace_back(l.case_id, std::to_string(l.line));
    by_index.push_back(&l);
  }
  std::vector<SegMetrics> metrics(lines.size());
  report.cases = run_batch(items, g.threads, log, [&](const std::string& id, const std::string& line_no) {
    const auto it = std::find_if(lines.begin(), lines.end(),
                                 [&](const ManifestLine& l) { return std::to_string(l.line) == line_no; });
    if (!it->error.empty()) throw Error(ErrorCode::InvalidArgument, it->error);
    const Mask3D pred = nifti::read_mask(it->pred);
    const Mask3D gt = nifti::read_mask(it->gt);
    if (!pred.geometry().same_grid(gt.geometry()))
      throw Error(ErrorCode::GridMismatch, "prediction and reference lie on different grids");
    const SegMetrics m = evaluate_case(id, pred, gt);
    metrics[static_cast<std::size_t>(it - lines.begin())] = m;
    json r;
    r["case_id"] = id;
    r["prediction"] = it->pred;
    r["reference"] = it->gt;
    r["dice"] = m.dice;
    r["hd95_mm"] = m.hd95_mm ? json(*m.hd95_mm) : json(nullptr);
    return r;
  });

  // Manifest "input" is the line number; report the paths instead.
  for (auto& c : report.cases) {
    if (c.failure.is_null()) continue;
    const auto it = std::find_if(lines.begin(), lines.end(),
                                 [&](const ManifestLine& l) { return std::to_string(l.line) == c.input; });
    c.failure["input"] = it->pred.empty() ? json(nullptr) : json(it->pred);
    c.failure["line"] = it->line;
  }

  std::vector<SegMetrics> ok;
  for (const auto& c : report.cases) {
    if (!c.failure.is_null()) continue;
    SegMetrics m;
    m.case_id = c.case_id;
    m.dice = c.result["dice"].get<double>();
    if (!c.result["hd95_mm"].is_null()) m.hd95_mm = c.result["hd95_mm"].get<double>();
    ok.push_back(m);
  }
  if (!ok.empty()) {
    json agg;
    agg["dice"] = to_json(aggregate_stats(ok, MetricField::Dice));
    try {
      agg["hd95_mm"] = to_json(aggregate_stats(ok, MetricField::HD95));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllUndefined) throw;
      agg["hd95_mm"] = nullptr;
    }
    report.aggregate = std::move(agg);
  }
  return report;
}

Report run_sample(const GlobalOptions& g, const SampleOptions& o, const fs::path& out_dir, Log& log) {
  const Modality modality = modality_hint(g);
  if (o.patch_size.size() != 3) throw ConfigError("--patch-size takes three values");
  PatchSpec spec;
  spec.size = {o.patch_size[0], o.patch_size[1], o.patch_size[2]};
  spec.count = o.count;
  spec.seed = o.seed;
  spec.min_fg_fraction = o.min_fg_fraction;
  spec.max_attempts_per_patch = o.max_attempts;
  validate_or_config_error([&] { spec.validate(); });

  Report report;
  report.config_echo = global_echo(g, "sample", out_dir);
  report.config_echo["inputs"] = json::array({o.input});
  report.config_echo["params"] = {{"fg", o.fg.empty() ? json(nullptr) : json(o.fg)},
                                  {"anon", o.anon.empty() ? json(nullptr) : json(o.anon)},
                                  {"patch_size", o.patch_size},
                                  {"count", o.count},
                                  {"seed", o.seed},
                                  {"min_fg_fraction", o.min_fg_fraction},
                                  {"max_attempts_per_patch", o.max_attempts},
                                  {"dry_run", o.dry_run}};

  // The batch is the single input; patch work inside it uses every thread.
  report.cases = run_batch(items_from_inputs({o.input}), 1, log, [&](const std::string& id, const std::string& in) {
    const auto loaded = nifti::read_volume(in, modality);
    const Mask3D fg = o.fg.empty() ? segment_foreground(loaded.volume, ForegroundParams::defaults_for(modality))
                                   : nifti::read_mask(o.fg);
    std::optional<Mask3D> anon;
    if (!o.anon.empty()) anon = nifti::read_mask(o.anon);
    require_same_grid(loaded.volume.geometry(), fg.geometry(), "foreground mask on a different grid");
    if (anon) require_same_grid(loaded.volume.geometry(), anon->geometry(), "anonymization mask on a different grid");

    json manifest;
    manifest["tool_version"] = std::string(kVersion);
    manifest["source"] = in;
    manifest["case_id"] = id;
    manifest["patch_size"] = o.patch_size;
    manifest["seed"] = o.seed;
    manifest["min_fg_fraction"] = o.min_fg_fraction;
    json patches = json::array();

    const fs::path patch_dir = out_dir / "patches";
    auto emit = [&](std::size_t index, const Index3& origin, const Index3& center, double fg_fraction,
                    std::optional<fs::path> data_path, std::optional<fs::path> loss_path) {
      json p;
      p["index"] = index;
      p["origin"] = to_json(origin);
      p["center"] = to_json(center);
      p["fg_fraction"] = fg_fraction;
      p["data_path"] = data_path ? json(fs::relative(*data_path, out_dir).string()) : json(nullptr);
      p["loss_mask_path"] = loss_path ? json(fs::relative(*loss_path, out_dir).string()) : json(nullptr);
      patches.push_back(std::move(p));
    };

    if (o.dry_run) {
      for (const auto& plan : plan_patches(fg, spec, g.threads))
        emit(plan.index, plan.origin, plan.center, plan.fg_fraction, std::nullopt, std::nullopt);
    } else {
      fs::create_directories(patch_dir);
      const auto sampled = sample_patches(loaded.volume, fg, anon ? &*anon : nullptr, spec, g.threads);
      for (const auto& sp : sampled) {
        std::ostringstream stem;
        stem << id << "_p" << std::setw(5) << std::setfill('0') << sp.index;
        const fs::path data_path = patch_dir / (stem.str() + ".nii.gz");
        const fs::path loss_path = patch_dir / (stem.str() + "_loss.nii.gz");
        const auto grid = patch_grid(loaded.volume.geometry(), sp.origin, sp.size, sp.data);
        nifti::NiftiHeader h = loaded.header;
        h.dim = {3, static_cast<std::int16_t>(sp.size[0]), static_cast<std::int16_t>(sp.size[1]),
                 static_cast<std::int16_t>(sp.size[2]), 1, 1, 1, 1};
        nifti::write_volume(grid, h, data_path);
        Mask3D loss(grid.geometry());
        loss.voxels() = sp.loss_mask;
        nifti::write_mask(loss, h, loss_path);
        emit(sp.index, sp.origin, sp.center, sp.fg_fraction, data_path, loss_path);
      }
    }
    manifest["patches"] = std::move(patches);
    const fs::path manifest_path = out_dir / "manifest.json";
    write_text(manifest_path, manifest.dump(2) + "\n");

    json r;
    r["case_id"] = id;
    r["input"] = in;
    r["manifest"] = manifest_path.string();
    r["patch_count"] = manifest["patches"].size();
    r["dry_run"] = o.dry_run;
    return r;
  });
  return report;
}

json header_json(const nifti::NiftiHeader& h) {
  json j;
  j["sizeof_hdr"] = h.sizeof_hdr;
  j["dim"] = h.dim;
  j["datatype_code"] = h.datatype_code;
  j["bitpix"] = h.bitpix;
  j["pixdim"] = h.pixdim;
  j["vox_offset"] = h.vox_offset;
  j["scl_slope"] = h.scl_slope;
  j["scl_inter"] = h.scl_inter;
  j["qform_code"] = h.qform_code;
  j["sform_code"] = h.sform_code;
  j["quatern"] = {h.quatern_b, h.quatern_c, h.quatern_d};
  j["qoffset"] = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
  j["srow_x"] = h.srow_x;
  j["srow_y"] = h.srow_y;
  j["srow_z"] = h.srow_z;
  j["magic"] = std::string(h.magic.data(), 3);
  j["byte_order"] = h.big_endian ? "big" : "little";
  return j;
}

Report run_info(const GlobalOptions& g, const InfoOptions& o, const fs::path& out_dir, Log& log, std::ostream& out) {
  const Modality modality = modality_hint(g);
  Report report;
  report.config_echo = global_echo(g, "info", out_dir);
  report.config_echo["inputs"] = o.inputs;
  report.cases = run_batch(items_from_inputs(o.inputs), g.threads, log, [&](const std::string& id, const std::string& in) {
    const auto loaded = nifti::read_volume(in, modality);
    const auto stats = volume_stats(loaded.volume);
    json r;
    r["case_id"] = id;
    r["input"] = in;
    r["header"] = header_json(loaded.header);
    json affine = json::array();
    for (const auto& row : loaded.volume.affine()) affine.push_back(row);
    r["affine"] = std::move(affine);
    r["stats"] = {{"min", stats.min},   {"max", stats.max},
                  {"mean", stats.mean}, {"std", stats.std},
                  {"nonzero_fraction", stats.nonzero_fraction}, {"histogram", stats.histogram}};
    return r;
  });
  json dump = json::array();
  for (const auto& c : report.cases)
    if (c.failure.is_null()) dump.push_back(c.result);
  out << dump.dump(2) << '\n';
  return report;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  GlobalOptions g;
  if (const char* env = std::getenv(kOutputDirEnv)) g.out = env;
  if (const char* env = std::getenv(kModalityEnv)) g.modality = env;
  ForegroundOptions fg_opts;
  DetectOptions det_opts;
  SimulateOptions sim_opts;
  EvalOptions eval_opts;
  SampleOptions sample_opts;
  InfoOptions info_opts;

  CLI::App app{"volprep: volumetric preprocessing for self-supervised pretraining", "volprep"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--out,-o", g.out, "Output directory (default: $VOLPREP_OUT or .)");
  app.add_option("--threads,-j", g.threads, "Worker threads; 1 gives the single-thread reference path")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.add_flag("--quiet,!--verbose", g.quiet, "Suppress progress lines on stderr (use --quiet=false to show them)");
  app.add_option("--modality", g.modality, "Modality hint: ct, mr or unknown (default: $VOLPREP_MODALITY)");

  auto* fg = app.add_subcommand("foreground", "Anatomical foreground masks");
  fg->add_option("--in,-i", fg_opts.inputs, "Input volumes")->required()->expected(1, -1);
  fg->add_option("--threshold-mode", fg_opts.threshold_mode, "auto, otsu, fixed-ct or manual")
      ->check(CLI::IsMember({"auto", "otsu", "fixed-ct", "manual"}));
  fg->add_option("--threshold-value", fg_opts.threshold_value, "Threshold for fixed-ct (HU) and manual modes");
  fg->add_option("--closing-radius-mm", fg_opts.closing_radius_mm, "Closing ball radius (mm)");
  fg->add_option("--min-component-fraction", fg_opts.min_component_fraction,
                 "Drop components smaller than this fraction of the largest");
  fg->add_option("--keep", fg_opts.keep, "largest or all-above-fraction")
      ->check(CLI::IsMember({"largest", "all-above-fraction"}));

  auto* det = app.add_subcommand("detect-anon", "Detect defaced or blurred regions");
  det->add_option("--in,-i", det_opts.inputs, "Input head volumes")->required()->expected(1, -1);
  det->add_option("--zero-tolerance", det_opts.params.zero_tolerance, "|v| <= tolerance counts as zero");
  det->add_option("--min-zero-region-vox", det_opts.params.min_zero_region_vox, "Smallest region kept (voxels)");
  det->add_option("--blur-window-vox", det_opts.params.blur_window_vox, "Energy window (odd, >= 3)");
  det->add_option("--blur-ratio-threshold", det_opts.params.blur_ratio_threshold,
                  "Energy below ratio * reference median is blur-like");
  det->add_option("--boundary-growth-vox", det_opts.params.boundary_growth_vox, "Outward growth of blur regions");
  det->add_option("--reference-depth-mm", det_opts.params.reference_depth_mm, "Depth of the reference tissue");
  det->add_option("--envelope-radius-mm", det_opts.params.envelope_radius_mm, "Head envelope closing radius");

  auto* sim = app.add_subcommand("simulate-anon", "Apply a synthetic anonymization scheme");
  sim->add_option("--in,-i", sim_opts.inputs, "Input head volumes")->required()->expected(1, -1);
  sim->add_option("--scheme", sim_opts.scheme, "deface, reface or reface-plus");
  sim->add_option("--head-mask", sim_opts.head_mask, "Head mask (default: foreground pipeline)");
  sim->add_option("--blur-sigma-mm", sim_opts.blur_sigma_mm, "Blur sigma for reface schemes (mm)");
  sim->add_option("--skull-shell-mm", sim_opts.skull_shell_mm, "Outer shell depth for reface-plus (mm)");
  sim->add_option("--anterior-fraction", sim_opts.region.anterior_fraction, "Anterior share of the head box");
  sim->add_option("--inferior-fraction", sim_opts.region.inferior_fraction, "Inferior share of the head box");
  sim->add_option("--ear-radius-mm", sim_opts.region.ear_radius_mm, "Ear ball radius (mm)");

  auto* ev = app.add_subcommand("eval", "Dice and HD95 over a TSV manifest");
  ev->add_option("--manifest,-m", eval_opts.manifest, "Lines of case_id<TAB>pred_path<TAB>gt_path")->required();

  auto* smp = app.add_subcommand("sample", "Foreground-constrained patches with loss masks");
  smp->add_option("--in,-i", sample_opts.input, "Input volume")->required();
  smp->add_option("--fg", sample_opts.fg, "Foreground mask (default: foreground pipeline)");
  smp->add_option("--anon", sample_opts.anon, "Anonymization mask excluded from the loss");
  smp->add_option("--patch-size", sample_opts.patch_size, "Patch size in voxels (x y z)")->expected(3);
  smp->add_option("--count", sample_opts.count, "Number of patches");
  smp->add_option("--seed", sample_opts.seed, "Sampling seed");
  smp->add_option("--min-fg-fraction", sample_opts.min_fg_fraction, "Minimum foreground share per patch");
  smp->add_option("--max-attempts", sample_opts.max_attempts, "Draws per patch before giving up");
  smp->add_flag("--dry-run", sample_opts.dry_run, "Write only the manifest");

  auto* inf = app.add_subcommand("info", "Print decoded header and volume statistics");
  inf->add_option("--in,-i", info_opts.inputs, "Input volumes")->required()->expected(1, -1);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (!g.quiet) err << "volprep: " << e.what() << '\n';
    return kExitConfigError;
  }

  Log log(err, g.quiet, parse_level(g.log_level));
  fs::path out_dir;
  try {
    out_dir = prepare_output_dir(g.out);
  } catch (const ConfigError& e) {
    log.write(Level::Error, e.what());
    return kExitConfigError;
  }

  auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    Report report;
    if (name == "foreground") {
      report = run_foreground(g, fg_opts, out_dir, log);
    } else if (name == "detect-anon") {
      report = run_detect(g, det_opts, out_dir, log);
    } else if (name == "simulate-anon") {
      report = run_simulate(g, sim_opts, out_dir, log);
    } else if (name == "eval") {
      report = run_eval(g, eval_opts, out_dir, log);
    } else if (name == "sample") {
      report = run_sample(g, sample_opts, out_dir, log);
    } else {
      report = run_info(g, info_opts, out_dir, log, out);
    }
    write_report(out_dir, report);
    return report.any_failure() ? kExitCaseFailures : kExitOk;
  } catch (const ConfigError& e) {
    Report report;
    report.config_echo = {{"subcommand", name}, {"output_dir", out_dir.string()}};
    report.extra_failures.push_back(failure_record("", "", "ConfigError", e.what()));
    log.write(Level::Error, e.what());
    try {
      write_report(out_dir, report);
    } catch (const Error&) {
    }
    return kExitConfigError;
  } catch (const Error& e) {
    log.write(Level::Error, e.what());
    return kExitConfigError;
  }
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

int main_entry(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace volprep::cli
