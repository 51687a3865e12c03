// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0
//
// flowzero: command-line front end for layout planning, refinement,
// noise shifting and bundle emission.

#include <cstdio>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowzero/bench.hpp"
#include "flowzero/bundle.hpp"
#include "flowzero/http_client.hpp"
#include "flowzero/refine.hpp"
#include "flowzero/render.hpp"

namespace fz = flowzero;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitUsage = 2;

struct Settings {
  int frames = 8;
  std::string canvas = "512x512";
  std::string latent = "64x64x4";
  int lambda = 3;
  int max_iter = 5;
  bool inclusive = false;
  double pixel_scale = 4.0;
  double sigma_phi = 0.3;
  std::uint64_t seed = 0;
  std::string mock;
  std::string record;
  std::string replay;
  std::string out = "flowzero_out";
  std::string feedback = "llm";
  std::string config;
  std::string dtype = "f64";
  std::string templates;
  std::string model = "gpt-4";
  double temperature = 0.7;
  double min_disp = 0.05;
  double ratio_threshold = 1.2;
  double visibility_tolerance = 0.1;
  int concurrency = 4;
  int cases = 20;
  bool simulated = false;
  double error_rate = 0.3;
};

struct Shape3 {
  std::size_t h = 0, w = 0, c = 0;
};

std::vector<std::size_t> parse_dims(const std::string& text, std::size_t count, const char* flag) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      dims.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw fz::ConfigError(std::string(flag) + " expects positive integers separated by 'x', got \"" + text + "\"");
    }
  }
  if (dims.size() != count) {
    throw fz::ConfigError(std::string(flag) + " expects " + std::to_string(count) + " dimensions, got \"" + text + "\"");
  }
  return dims;
}

Shape3 latent_shape(const Settings& s) {
  const auto d = parse_dims(s.latent, 3, "--latent");
  return {d[0], d[1], d[2]};
}

fz::RefineConfig refine_config(const Settings& s) {
  fz::RefineConfig cfg;
  cfg.threshold = s.lambda;
  cfg.max_iterations = s.max_iter;
  cfg.inclusive = s.inclusive;
  cfg.feedback_mode = s.feedback == "local" ? fz::FeedbackMode::kLocal : fz::FeedbackMode::kLlm;
  cfg.generate_temperature = s.temperature;
  cfg.model_id = s.model;
  cfg.thresholds = {s.min_disp, s.ratio_threshold, s.visibility_tolerance};
  fz::validate(cfg);
  return cfg;
}

fz::NoiseParams noise_params(const Settings& s) { return {s.pixel_scale, s.sigma_phi, s.seed}; }

fz::TensorDtype tensor_dtype(const Settings& s) {
  return s.dtype == "f32" ? fz::TensorDtype::kFloat32 : fz::TensorDtype::kFloat64;
}

fz::PromptTemplates templates(const Settings& s) {
  return s.templates.empty() ? fz::default_templates() : fz::load_templates(s.templates);
}

/// --replay, then --mock, then the HTTP endpoint from the environment.
std::shared_ptr<fz::LlmClient> base_client(const Settings& s) {
  if (!s.replay.empty()) return std::make_shared<fz::ReplayClient>(s.replay);
  if (!s.mock.empty()) return std::make_shared<fz::ScriptedClient>(fz::load_script(s.mock));
  return std::make_shared<fz::OpenAiClient>(fz::OpenAiClient::options_from_env());
}

/// Runs `body` with the configured client, saving the transcript to
/// --record afterwards even when the body fails.
template <typename Body>
void with_client(const Settings& s, Body&& body) {
  auto client = base_client(s);
  if (s.record.empty()) {
    body(*client);
    return;
  }
  fz::RecordingClient rec(client);
  try {
    body(rec);
  } catch (...) {
    rec.save(s.record);
    throw;
  }
  rec.save(s.record);
}

fz::DynamicSceneSyntax load_dss(const std::string& path) { return fz::parse_dss(fz::detail::read_file(path)); }

void write_text(const std::filesystem::path& path, const std::string& text) { fz::write_file_atomic(path, text); }

std::string format_summary(const fz::RefinementTrace& trace, const fz::RefineConfig& cfg,
                           const fz::BundleManifest& m, const std::string& bundle_dir) {
  std::ostringstream o;
  const auto& dss = trace.selected();
  o << "prompt: " << dss.prompt.text << "\n";
  o << "frames: " << dss.num_frames() << "\n";
  o << "refinement: " << trace.iterations.size() << " iteration(s), " << fz::to_string(trace.terminal_reason)
    << " (lambda " << cfg.threshold << ", " << fz::to_string(cfg.feedback_mode) << " feedback)\n";
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    o << "  iter " << i + 1 << ": confidence " << trace.iterations[i].feedback.confidence << "\n";
  }
  o << "selected iteration: " << trace.best_index() + 1 << "\n";
  o << "objects:";
  for (const auto& n : dss.object_names()) o << " \"" << n << "\"";
  o << "\n";
  o << "latent: " << m.latent_shape[0] << "x" << m.latent_shape[1] << "x" << m.latent_shape[2] << " "
    << fz::to_string(m.dtype) << ", pixel scale " << m.params.pixel_scale << ", seed " << m.params.rng_seed << "\n";
  o << "background motion:\n";
  char line[160];
  for (const auto& f : m.frames) {
    if (f.random) {
      std::snprintf(line, sizeof(line), "  frame %d: %-10s speed %.2f  phase noise %.3f\n", f.frame,
                    std::string(fz::to_string(f.direction)).c_str(), f.speed, f.phase_magnitude);
    } else {
      std::snprintf(line, sizeof(line), "  frame %d: %-10s speed %.2f  offset (%+.2f, %+.2f) px\n", f.frame,
                    std::string(fz::to_string(f.direction)).c_str(), f.speed, f.shift.offset_x, f.shift.offset_y);
    }
    o << line;
  }
  o << "bundle: " << bundle_dir << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(const Settings& s, const std::string& prompt) {
  const auto cfg = refine_config(s);
  const auto tmpl = templates(s);
  with_client(s, [&](fz::LlmClient& client) {
    const auto dss = fz::generate_syntax({prompt, s.frames}, client, tmpl, cfg);
    const std::string text = fz::serialize_dss(dss) + "\n";
    write_text(std::filesystem::path(s.out) / "dss.json", text);
    std::cout << text;
  });
  return kExitOk;
}

int cmd_refine(const Settings& s, const std::string& prompt) {
  const auto cfg = refine_config(s);
  const auto tmpl = templates(s);
  with_client(s, [&](fz::LlmClient& client) {
    const auto trace = fz::run_refinement({prompt, s.frames}, client, cfg, tmpl);
    fz::write_trace(trace, cfg, s.out);
    write_text(std::filesystem::path(s.out) / "dss.json", fz::serialize_dss(trace.selected()) + "\n");
    std::cout << fz::trace_summary_json(trace, cfg).dump(2) << "\n";
  });
  return kExitOk;
}

int cmd_verify(const Settings& s, const std::string& path) {
  const auto dss = load_dss(path);
  const fz::VerifyThresholds th{s.min_disp, s.ratio_threshold, s.visibility_tolerance};
  const auto c = fz::infer_case(dss.prompt.text, dss);
  fz::ordered_json checks = fz::ordered_json::array();
  for (const auto& r : fz::rule_checks(dss, c, th)) {
    checks.push_back({{"rule", r.name}, {"passed", r.passed}, {"suggestion", r.suggestion}});
  }
  const fz::ordered_json doc{{"case", fz::to_json(c)},
                             {"checks", std::move(checks)},
                             {"feedback", fz::to_json(fz::local_feedback(dss, c, th))}};
  std::cout << doc.dump(2) << "\n";
  return kExitOk;
}

int cmd_shift(const Settings& s, const std::string& path) {
  const auto dss = load_dss(path);
  const auto shape = latent_shape(s);
  const auto motions = fz::background_motions(dss);
  const auto plans = fz::plan_noise_sequence(motions, shape.h, shape.w, noise_params(s));
  const auto base = fz::gaussian_noise(shape.h, shape.w, shape.c, s.seed);
  fz::ordered_json out = fz::ordered_json::array();
  for (const auto& p : plans) {
    const auto file = std::filesystem::path(s.out) / fz::noise_file_name(static_cast<std::size_t>(p.frame));
    fz::write_tensor(file, fz::realize_frame_noise(base, p), tensor_dtype(s));
    fz::ordered_json jp{{"frame", p.frame}, {"direction", std::string(fz::to_string(p.direction))}, {"speed", p.speed}};
    if (p.random) {
      jp["phase_magnitude"] = p.phase_magnitude;
      jp["phase_seed"] = p.phase_seed;
    } else {
      jp["offset_x"] = p.shift.offset_x;
      jp["offset_y"] = p.shift.offset_y;
    }
    jp["file"] = file.string();
    out.push_back(std::move(jp));
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_emit(const Settings& s, const std::string& path) {
  const auto dss = load_dss(path);
  const auto shape = latent_shape(s);
  const auto params = noise_params(s);
  const auto m = fz::emit_bundle(dss, fz::synthesize_noises(dss, shape.h, shape.w, shape.c, params), s.out, params,
                                 tensor_dtype(s));
  std::cout << fz::to_json(m).dump(2) << "\n";
  return kExitOk;
}

int cmd_render(const Settings& s, const std::string& path) {
  const auto dss = load_dss(path);
  const auto canvas = parse_dims(s.canvas, 2, "--canvas");
  fz::RenderOptions opt;
  opt.width = static_cast<int>(canvas[0]);
  opt.height = static_cast<int>(canvas[1]);
  for (const auto& p : fz::render_dss(dss, s.out, opt)) std::cout << p.string() << "\n";
  return kExitOk;
}

int cmd_pipeline(const Settings& s, const std::string& prompt) {
  const auto cfg = refine_config(s);
  const auto tmpl = templates(s);
  const auto shape = latent_shape(s);
  const auto params = noise_params(s);
  const std::filesystem::path out(s.out);
  fz::ensure_directory(out);
  with_client(s, [&](fz::LlmClient& client) {
    const auto trace = fz::run_refinement({prompt, s.frames}, client, cfg, tmpl);
    fz::write_trace(trace, cfg, out / "trace");
    const auto& dss = trace.selected();
    const auto noises = fz::synthesize_noises(dss, shape.h, shape.w, shape.c, params);
    const auto m = fz::emit_bundle(dss, noises, out / "bundle", params, tensor_dtype(s));
    const std::string summary = format_summary(trace, cfg, m, (out / "bundle").string());
    write_text(out / "summary.txt", summary);
    std::cout << summary;
  });
  return kExitOk;
}

int cmd_bench(const Settings& s) {
  auto cfg = refine_config(s);
  fz::BenchOptions opts;
  opts.cases_per_task = s.cases;
  opts.seed = s.seed;
  opts.num_frames = s.frames;
  opts.concurrency = s.concurrency;
  opts.templates = templates(s);
  const std::filesystem::path out(s.out);
  fz::ensure_directory(out);

  fz::ClientFactory inner;
  if (s.simulated) {
    inner = fz::simulated_factory(opts, s.error_rate, cfg.thresholds);
  } else {
    auto shared = base_client(s);
    inner = [shared](const fz::BenchCase&, std::size_t) { return shared; };
  }
  const std::size_t total = opts.tasks.size() * static_cast<std::size_t>(opts.cases_per_task);
  std::vector<std::shared_ptr<fz::RecordingClient>> recorders(total);
  std::mutex mu;
  auto factory = [&](const fz::BenchCase& c, std::size_t index) -> std::shared_ptr<fz::LlmClient> {
    auto rec = std::make_shared<fz::RecordingClient>(inner(c, index));
    std::lock_guard lock(mu);
    recorders.at(index) = rec;
    return rec;
  };

  const auto result = fz::run_benchmark(factory, cfg, opts);
  for (std::size_t i = 0; i < recorders.size(); ++i) {
    if (!recorders[i]) continue;
    char name[48];
    std::snprintf(name, sizeof(name), "case_%03zu.json", i);
    recorders[i]->save(out / "transcripts" / name);
  }
  const std::string table = fz::render_table(result);
  write_text(out / "bench_table.txt", table);
  write_text(out / "bench.json", fz::to_json(result).dump(2) + "\n");
  write_text(out / "rule_reports.jsonl", fz::rule_reports_jsonl(result));
  std::cout << table;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Flat JSON config: keys are long flag names ("max-iter" or "max_iter").
// Values only apply to flags not given on the command line.

void apply_config(CLI::App& app, const std::string& path) {
  const auto doc = fz::detail::read_json_file(path);
  if (!doc.is_object()) throw fz::ConfigError(path + ": config must be a flat JSON object");
  for (const auto& [key, value] : doc.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") throw fz::ConfigError(path + ": config files cannot include other config files");
    CLI::Option* opt = app.get_option_no_throw("--" + name);
    if (opt == nullptr) throw fz::ConfigError(path + ": unknown key \"" + key + "\"");
    if (opt->count() > 0) continue;
    if (value.is_object() || value.is_array() || value.is_null()) {
      throw fz::ConfigError(path + ": \"" + key + "\" must be a scalar");
    }
    opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw fz::ConfigError(path + ": \"" + key + "\": " + e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  CLI::App app{"flowzero: layout planning with self-refinement, motion-guided noise shifting and bundle emission"};
  app.name("flowzero");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--frames", s.frames, "Frames per video (N)")->check(CLI::Range(1, 1000))->capture_default_str();
  app.add_option("--canvas", s.canvas, "Render canvas WxH")->capture_default_str();
  app.add_option("--latent", s.latent, "Latent noise shape HxWxC")->capture_default_str();
  app.add_option("--lambda", s.lambda, "Confidence threshold for convergence")
      ->check(CLI::Range(1, 5))
      ->capture_default_str();
  app.add_option("--max-iter", s.max_iter, "Maximum verifications per refinement")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--inclusive", s.inclusive, "Converge on confidence >= lambda instead of >");
  app.add_option("--pixel-scale", s.pixel_scale, "Latent pixels travelled per frame at speed 1 (S)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--sigma-phi", s.sigma_phi, "Phase noise per frame for random background motion")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--seed", s.seed, "Seed for base noise and benchmark cases")->capture_default_str();
  app.add_option("--mock", s.mock, "Scripted replies (JSON array) instead of a live endpoint");
  app.add_option("--record", s.record, "Save the LLM transcript to this file");
  app.add_option("--replay", s.replay, "Replay a recorded transcript");
  app.add_option("--out", s.out, "Output directory")->capture_default_str();
  app.add_option("--feedback", s.feedback, "Verification source")
      ->check(CLI::IsMember({"llm", "local"}))
      ->capture_default_str();
  app.add_option("--config", s.config, "Flat JSON config; command-line flags take precedence");
  app.add_option("--dtype", s.dtype, "Noise tensor dtype")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  app.add_option("--templates", s.templates, "Directory with generate/verify/rectify template overrides");
  app.add_option("--model", s.model, "Model id sent to the endpoint")->capture_default_str();
  app.add_option("--temperature", s.temperature, "Sampling temperature for generation")
      ->check(CLI::Range(0.0, 2.0))
      ->capture_default_str();
  app.add_option("--min-disp", s.min_disp, "Minimum centroid travel for a movement label")->capture_default_str();
  app.add_option("--ratio-threshold", s.ratio_threshold, "Area ratio for a grow/shrink label")->capture_default_str();
  app.add_option("--visibility-tolerance", s.visibility_tolerance, "Tolerance around the visibility target")
      ->capture_default_str();
  app.add_option("--concurrency", s.concurrency, "Benchmark worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--cases", s.cases, "Benchmark cases per task")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--simulated", s.simulated, "Benchmark against the simulated planner");
  app.add_option("--error-rate", s.error_rate, "Share of simulated cases with an injected error")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.footer("Environment: FLOWZERO_API_KEY (required for live calls), FLOWZERO_API_BASE.\n"
             "Exit codes: 0 ok, 1 pipeline error, 2 usage error.");

  std::string prompt;
  std::string dss_path;
  auto* generate = app.add_subcommand("generate", "Plan a layout for a prompt");
  generate->add_option("prompt", prompt, "Scene prompt")->required();
  auto* refine = app.add_subcommand("refine", "Plan and self-refine a layout");
  refine->add_option("prompt", prompt, "Scene prompt")->required();
  auto* verify = app.add_subcommand("verify", "Rule-check a layout file");
  verify->add_option("dss", dss_path, "Layout JSON")->required();
  auto* shift = app.add_subcommand("shift", "Write shifted noise tensors for a layout file");
  shift->add_option("dss", dss_path, "Layout JSON")->required();
  auto* emit = app.add_subcommand("emit", "Write a bundle for a layout file");
  emit->add_option("dss", dss_path, "Layout JSON")->required();
  auto* render = app.add_subcommand("render", "Draw a layout file as PNG frames");
  render->add_option("dss", dss_path, "Layout JSON")->required();
  auto* pipeline = app.add_subcommand("pipeline", "Refine, shift noise and emit a bundle");
  pipeline->add_option("prompt", prompt, "Scene prompt")->required();
  auto* bench = app.add_subcommand("bench", "Run the rule-based benchmark");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!s.config.empty()) apply_config(app, s.config);
    if (!s.mock.empty() && !s.replay.empty()) throw fz::ConfigError("--mock and --replay are mutually exclusive");
    if (*generate) return cmd_generate(s, prompt);
    if (*refine) return cmd_refine(s, prompt);
    if (*verify) return cmd_verify(s, dss_path);
    if (*shift) return cmd_shift(s, dss_path);
    if (*emit) return cmd_emit(s, dss_path);
    if (*render) return cmd_render(s, dss_path);
    if (*pipeline) return cmd_pipeline(s, prompt);
    if (*bench) return cmd_bench(s);
  } catch (const fz::ConfigError& e) {
    std::cerr << "flowzero: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fz::Error& e) {
    std::cerr << "flowzero: " << e.what() << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "flowzero: unexpected error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}
