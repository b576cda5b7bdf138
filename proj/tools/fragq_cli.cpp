// fragq command-line tool.
//
// Every subcommand resolves its settings as defaults <- --config file <- flags,
// rejects unknown keys, and writes the effective config (with its hash) next
// to its artifacts. Errors go to stderr as one JSON object
// {"error_class": ..., "message": ...} with a class-specific exit code.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "fragq/checkpoint.hpp"
#include "fragq/errors.hpp"
#include "fragq/flops.hpp"
#include "fragq/harness.hpp"
#include "fragq/manifest.hpp"
#include "fragq/metrics.hpp"
#include "fragq/quality_map.hpp"
#include "fragq/run_config.hpp"
#include "fragq/sampling.hpp"
#include "fragq/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fragq;

namespace {

int exit_code(const std::string& cls) {
  if (cls == "usage_error") return 2;
  if (cls == "config_error") return 3;
  if (cls == "decode_error" || cls == "io_error" || cls == "empty_clip") return 4;
  if (cls == "contract_error" || cls == "partition_error" || cls == "fragment_infeasible") return 5;
  if (cls == "non_finite") return 6;
  return 1;
}

int report(const std::string& cls, const std::string& msg) {
  std::cerr << json{{"error_class", cls}, {"message", msg}}.dump() << std::endl;
  return exit_code(cls);
}

// A subcommand whose flags map onto config keys (dashes become underscores).
struct Command {
  CLI::App* app = nullptr;
  json defaults;
  std::string config_file;
  std::map<std::string, std::string> raw;  // key -> flag text
  bool force = false;

  Command(CLI::App& parent, const std::string& name, const std::string& help, json defaults_)
      : app(parent.add_subcommand(name, help)), defaults(std::move(defaults_)) {
    app->add_option("--config", config_file, "JSON config file (flat, or one section per command)");
    for (const auto& [key, value] : defaults.items()) {
      std::string flag = key;
      for (char& c : flag)
        if (c == '_') c = '-';
      std::string type = value.is_boolean() ? "bool" : value.is_number_float() ? "real"
                         : value.is_number() ? "int" : "text";
      std::string def = value.is_string() ? value.get<std::string>() : value.dump();
      app->add_option("--" + flag, raw[key], type + " (default: " + (def.empty() ? "\"\"" : def) + ")");
    }
  }

  RunConfig resolve() const {
    RunConfig rc(app->get_name(), defaults);
    if (!config_file.empty()) rc.merge_file(config_file);
    json flags = json::object();
    for (const auto& [key, text] : raw) {
      if (app->get_option("--" + flag_of(key))->count() == 0) continue;
      const json& d = defaults.at(key);
      try {
        if (d.is_boolean()) {
          if (text == "true" || text == "1" || text == "on") flags[key] = true;
          else if (text == "false" || text == "0" || text == "off") flags[key] = false;
          else throw UsageError("--" + flag_of(key) + " expects true/false, got '" + text + "'");
        } else if (d.is_number_float()) {
          flags[key] = std::stod(text);
        } else if (d.is_number_unsigned()) {
          flags[key] = static_cast<std::uint64_t>(std::stoull(text));
        } else if (d.is_number_integer()) {
          flags[key] = static_cast<std::int64_t>(std::stoll(text));
        } else {
          flags[key] = text;
        }
      } catch (const std::logic_error&) {
        throw UsageError("--" + flag_of(key) + ": cannot parse '" + text + "'");
      }
    }
    rc.merge(flags, "command line");
    return rc;
  }

  static std::string flag_of(std::string key) {
    for (char& c : key)
      if (c == '_') c = '-';
    return key;
  }
};

fs::path output_root(const std::string& out) {
  fs::path p(out);
  if (p.is_relative())
    if (const char* root = std::getenv("FRAGQ_OUT_ROOT"); root != nullptr && *root != '\0') p = fs::path(root) / p;
  return p;
}

// Creates --out, refusing a non-empty directory unless forced.
fs::path prepare_out(const RunConfig& rc, bool force) {
  const std::string out = rc.get<std::string>("out");
  if (out.empty()) throw UsageError(rc.command() + " needs --out");
  const fs::path dir = output_root(out);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force)
      throw UsageError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
  }
  fs::create_directories(dir);
  std::ofstream(dir / "effective_config.json") << rc.record().dump(2) << "\n";
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

DistortionProfile profile_from(const RunConfig& rc) {
  DistortionProfile p;
  const auto name = rc.get<std::string>("profile");
  if (name == "blur") {
    p.noise_max = 0;
    p.shake_max = 0;
    p.blur_max = 3.0;
    p.coverage_min = 0.3;
    p.coverage_max = 0.6;
  } else if (name == "noise") {
    p.blur_max = 0;
    p.shake_max = 0;
  } else if (name != "default") {
    throw ConfigError("unknown profile '" + name + "' (expected default, blur or noise)");
  }
  p.frames = rc.get<int>("frames");
  p.height = rc.get<int>("height");
  p.width = rc.get<int>("width");
  return p;
}

json sampling_json(const SamplingSetup& s) {
  return {{"gf", s.grid.grids}, {"sf", s.grid.patch}, {"t", s.grid.frames},
          {"variant", std::string(variant_name(s.variant))}, {"pre_upscale", s.options.pre_upscale}};
}

// Sampling settings: explicit flags win, then the checkpoint's training setup.
SamplingSetup sampling_from(const RunConfig& rc, const json& ckpt_extra) {
  SamplingSetup s;
  const SamplingSetup defaults;
  const json trained = ckpt_extra.contains("sampling") ? ckpt_extra["sampling"] : json::object();
  auto pick = [&](const char* key, int fallback) {
    const int v = rc.get<int>(key);
    return v > 0 ? v : trained.value(key, fallback);
  };
  s.grid.grids = pick("gf", defaults.grid.grids);
  s.grid.patch = pick("sf", defaults.grid.patch);
  s.grid.frames = pick("t", defaults.grid.frames);
  const auto variant = rc.get<std::string>("variant");
  s.variant = parse_variant(variant.empty() ? trained.value("variant", std::string("gms")) : variant);
  s.options.pre_upscale = rc.get<bool>("pre_upscale");
  s.grid.validate();
  return s;
}

Manifest manifest_arg(const RunConfig& rc) {
  const auto m = rc.get<std::string>("manifest");
  if (m.empty()) throw UsageError(rc.command() + " needs --manifest");
  return read_manifest(m);
}

LoadedCheckpoint checkpoint_arg(const RunConfig& rc) {
  const auto c = rc.get<std::string>("checkpoint");
  if (c.empty()) throw UsageError(rc.command() + " needs --checkpoint");
  return load_checkpoint(c);
}

json sampling_keys() {
  return {{"gf", 0}, {"sf", 0}, {"t", 0}, {"variant", ""}, {"pre_upscale", false}};
}

json merged(json a, const json& b) {
  for (const auto& [k, v] : b.items()) a[k] = v;
  return a;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Command& c) {
  const RunConfig rc = c.resolve();
  const int n = rc.get<int>("n");
  if (n < 1) throw UsageError("--n must be >= 1");
  const DistortionProfile profile = profile_from(rc);
  profile.validate();
  const fs::path dir = prepare_out(rc, c.force);
  fs::create_directories(dir / "clips");
  const auto corpus = synthesize_corpus(n, rc.get<std::uint64_t>("seed"), profile);
  std::vector<std::string> ids;
  for (const auto& lc : corpus) ids.push_back(lc.clip.source_id);
  const auto splits = assign_splits(ids, {rc.get<double>("train_ratio"), rc.get<double>("val_ratio")});
  Manifest m;
  m.base_dir = dir;
  json labels = json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string rel = "clips/" + ids[i] + ".fvc";
    save_clip(dir / rel, corpus[i].clip);
    m.entries.push_back({rel, corpus[i].label.mos, splits[i]});
    const auto& d = corpus[i].label.degradation;
    labels.push_back({{"id", ids[i]}, {"mos", corpus[i].label.mos}, {"blur_sigma", d.blur_sigma},
                      {"noise_level", d.noise_level}, {"shake_amplitude", d.shake_amplitude},
                      {"coverage", d.coverage}});
  }
  write_manifest(dir / "manifest.tsv", m);
  write_json(dir / "labels.json", {{"run", rc.record()}, {"clips", labels}});
  std::cout << (dir / "manifest.tsv").string() << "\n";
  return 0;
}

int cmd_fragments(const Command& c) {
  const RunConfig rc = c.resolve();
  const auto in = rc.get<std::string>("in");
  if (in.empty()) throw UsageError("fragments needs --in");
  GridSpec spec{rc.get<int>("gf"), rc.get<int>("sf"), rc.get<int>("t")};
  spec.validate();
  const Variant variant = parse_variant(rc.get<std::string>("variant"));
  SamplerOptions opt{rc.get<bool>("pre_upscale")};
  const VideoClip clip = select_frames(load_clip(in), spec.frames);
  const FragmentBatch batch = sample(clip, spec, variant, rc.get<std::uint64_t>("seed"), opt);
  const fs::path dir = prepare_out(rc, c.force);
  save_fragments((dir / "fragments.frg").string(), batch);
  if (rc.get<bool>("contact_sheet")) {
    // All frames side by side.
    const int W = batch.side * batch.frames;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(batch.side) * W * 3);
    for (int t = 0; t < batch.frames; ++t)
      for (int y = 0; y < batch.side; ++y)
        for (int x = 0; x < batch.side; ++x)
          for (int ch = 0; ch < 3; ++ch)
            rgb[(static_cast<std::size_t>(y) * W + t * batch.side + x) * 3 + ch] =
                batch.at(t, y, x, batch.channels == 3 ? ch : 0);
    write_ppm(dir / "contact_sheet.ppm", batch.side, W, rgb);
  }
  std::cout << json{{"variant", std::string(variant_name(batch.variant))}, {"frames", batch.frames}, {"side", batch.side},
                    {"channels", batch.channels}, {"source", {clip.height, clip.width}},
                    {"sampled_fraction", static_cast<double>(batch.side) * batch.side /
                                             (static_cast<double>(clip.height) * clip.width)}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const Command& c) {
  const RunConfig rc = c.resolve();
  const Manifest m = manifest_arg(rc);
  FanetConfig mc = preset_by_name(rc.get<std::string>("preset"));
  SamplingSetup ss;
  ss.grid = {rc.get<int>("gf"), rc.get<int>("sf"), rc.get<int>("t")};
  ss.grid.validate();
  ss.variant = parse_variant(rc.get<std::string>("variant"));
  ss.options.pre_upscale = rc.get<bool>("pre_upscale");
  mc.fragment_patch = ss.grid.patch;
  TrainConfig tc;
  tc.batch_size = rc.get<int>("batch_size");
  tc.lr = rc.get<double>("lr");
  tc.weight_decay = rc.get<double>("weight_decay");
  tc.epochs = rc.get<int>("epochs");
  tc.seed = rc.get<std::uint64_t>("seed");
  tc.init_seed = rc.get<std::uint64_t>("init_seed");
  tc.val_seed = rc.get<std::uint64_t>("val_seed");
  tc.redraw_plan_per_iter = rc.get<bool>("redraw_plan_per_iter");
  tc.validate();
  const Dataset train_set = load_dataset(m, "train", ss.grid.frames);
  const Dataset val_set = load_dataset(m, "val", ss.grid.frames);
  const fs::path dir = prepare_out(rc, c.force);
  TrainOutputs out;
  out.checkpoint = dir / "model.ckpt";
  out.metric_log = dir / "metrics.jsonl";
  out.dump_dir = dir;
  out.run_info = {{"config_hash", rc.hash()}, {"sampling", sampling_json(ss)}};
  std::ofstream(out.metric_log, std::ios::trunc).close();
  out.on_epoch = [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " loss " << r.train_loss << " val_srcc " << r.val_srcc << "\n";
  };
  // The checkpoint carries the sampling setup so eval/score can reuse it.
  TrainResult res = train(train_set, val_set, tc, mc, ss, out);
  save_checkpoint(out.checkpoint, res.model,
                  {{"epoch", res.best_epoch}, {"val_srcc", res.best_val_srcc}, {"sampling", sampling_json(ss)},
                   {"run", rc.record()}});
  write_json(dir / "summary.json",
             {{"best_epoch", res.best_epoch}, {"best_val_srcc", res.best_val_srcc}, {"run", rc.record()}});
  std::cout << out.checkpoint.string() << "\n";
  return 0;
}

int cmd_eval(const Command& c) {
  const RunConfig rc = c.resolve();
  const LoadedCheckpoint ck = checkpoint_arg(rc);
  const SamplingSetup ss = sampling_from(rc, ck.extra);
  const Dataset data = load_dataset(manifest_arg(rc), rc.get<std::string>("split"), ss.grid.frames);
  const EvalRecord r = evaluate(ck.model, data, ss, derive_seeds(rc.get<std::uint64_t>("seed"),
                                                                 rc.get<int>("n_samples")));
  json j = to_json(r);
  j["run"] = rc.record();
  if (!rc.get<std::string>("out").empty()) write_json(prepare_out(rc, c.force) / "eval.json", j);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_score(const Command& c, const std::vector<std::string>& inputs) {
  const RunConfig rc = c.resolve();
  if (inputs.empty()) throw UsageError("score needs at least one input clip");
  const LoadedCheckpoint ck = checkpoint_arg(rc);
  const SamplingSetup ss = sampling_from(rc, ck.extra);
  const auto seeds = derive_seeds(rc.get<std::uint64_t>("seed"), rc.get<int>("n_samples"));
  for (const auto& in : inputs) {
    const VideoClip clip = select_frames(load_clip(in), ss.grid.frames);
    double mean = 0;
    int k = 0;
    for (auto s : seeds) mean += (ck.model.forward(sample_for(clip, clip.source_id, ss, s)).score - mean) / ++k;
    std::printf("%s\t%.17g\n", in.c_str(), mean);
  }
  return 0;
}

int cmd_map(const Command& c) {
  const RunConfig rc = c.resolve();
  const LoadedCheckpoint ck = checkpoint_arg(rc);
  const SamplingSetup ss = sampling_from(rc, ck.extra);
  const auto in = rc.get<std::string>("in");
  if (in.empty()) throw UsageError("map needs --in");
  const VideoClip clip = select_frames(load_clip(in), ss.grid.frames);
  const FragmentBatch batch = sample_for(clip, clip.source_id, ss, rc.get<std::uint64_t>("seed"));
  const QualityOutput out = ck.model.forward(batch);
  const QualityMapRecord rec = make_quality_map_record(out, clip.source_id, std::string(variant_name(ss.variant)));
  const fs::path dir = prepare_out(rc, c.force);
  json j = to_json(rec);
  j["run"] = rc.record();
  write_json(dir / "quality_map.json", j);
  OverlayOptions opt;
  opt.score_lo = rc.get<double>("score_lo");
  opt.score_hi = rc.get<double>("score_hi");
  write_ppm(dir / "overlay.ppm", rec.frame_height, rec.frame_width, render_overlay(rec, opt, &clip, 0));
  std::cout << json{{"score", rec.score}, {"map_shape", {rec.map_t, rec.map_h, rec.map_w}}}.dump() << "\n";
  return 0;
}

int cmd_stability(const Command& c) {
  const RunConfig rc = c.resolve();
  const LoadedCheckpoint ck = checkpoint_arg(rc);
  const SamplingSetup ss = sampling_from(rc, ck.extra);
  const Dataset data = load_dataset(manifest_arg(rc), rc.get<std::string>("split"), ss.grid.frames);
  const StabilityRecord r = stability_analysis(ck.model, data, ss, rc.get<int>("repeats"), rc.get<int>("ensemble"),
                                               rc.get<std::uint64_t>("seed"), rc.get<double>("label_range"));
  json j = to_json(r);
  j["run"] = rc.record();
  if (!rc.get<std::string>("out").empty()) write_json(prepare_out(rc, c.force) / "stability.json", j);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_sweep(const Command& c, const std::vector<std::string>& groups) {
  const RunConfig rc = c.resolve();
  if (groups.empty()) throw UsageError("sweep needs --group name=manifest (repeatable)");
  const LoadedCheckpoint ck = checkpoint_arg(rc);
  const SamplingSetup ss = sampling_from(rc, ck.extra);
  std::vector<std::pair<std::string, Dataset>> data;
  for (const auto& g : groups) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) throw UsageError("--group expects name=manifest, got '" + g + "'");
    data.emplace_back(g.substr(0, eq),
                      load_dataset(read_manifest(g.substr(eq + 1)), rc.get<std::string>("split"), ss.grid.frames));
  }
  json j = sweep_to_json(resolution_sweep(ck.model, data, ss,
                                          derive_seeds(rc.get<std::uint64_t>("seed"), rc.get<int>("n_samples"))));
  j["run"] = rc.record();
  if (!rc.get<std::string>("out").empty()) write_json(prepare_out(rc, c.force) / "sweep.json", j);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_flops(const Command& c) {
  const RunConfig rc = c.resolve();
  const FanetConfig cfg = preset_by_name(rc.get<std::string>("preset"));
  FlopsReport r;
  if (rc.get<bool>("full_resolution")) {
    r = flops_count(cfg, rc.get<int>("t"), rc.get<int>("height"), rc.get<int>("width"), cfg.in_channels);
  } else {
    GridSpec spec{rc.get<int>("gf"), rc.get<int>("sf"), rc.get<int>("t")};
    r = fragment_flops(cfg, spec, rc.get<int>("height"), rc.get<int>("width"));
  }
  json j = to_json(r);
  j["parameters"] = parameter_count(cfg);
  j["run"] = rc.record();
  if (!rc.get<std::string>("out").empty()) write_json(prepare_out(rc, c.force) / "flops.json", j);
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fragq: fragment-based video quality assessment"};
  app.require_subcommand(1);

  Command synth(app, "synth", "Generate a labelled synthetic corpus and its manifest",
                {{"n", 200}, {"seed", std::uint64_t{0}}, {"profile", "default"}, {"frames", 8}, {"height", 192},
                 {"width", 192}, {"train_ratio", 0.6}, {"val_ratio", 0.2}, {"out", ""}});
  Command frags(app, "fragments", "Sample fragments from one clip",
                {{"in", ""}, {"gf", 7}, {"sf", 32}, {"t", 32}, {"seed", std::uint64_t{0}}, {"variant", "gms"},
                 {"pre_upscale", false}, {"contact_sheet", true}, {"out", ""}});
  const SamplingSetup ds;
  const TrainConfig dt;
  Command trainc(app, "train", "Train a model on a manifest's train split",
                 {{"manifest", ""}, {"preset", "tiny"}, {"gf", ds.grid.grids}, {"sf", ds.grid.patch},
                  {"t", ds.grid.frames}, {"variant", "gms"}, {"pre_upscale", false}, {"batch_size", dt.batch_size},
                  {"lr", dt.lr}, {"weight_decay", dt.weight_decay}, {"epochs", dt.epochs}, {"seed", dt.seed},
                  {"init_seed", dt.init_seed}, {"val_seed", dt.val_seed},
                  {"redraw_plan_per_iter", dt.redraw_plan_per_iter}, {"out", ""}});
  Command evalc(app, "eval", "Evaluate a checkpoint on a manifest split",
                merged(sampling_keys(), {{"checkpoint", ""}, {"manifest", ""}, {"split", "test"},
                                         {"n_samples", 1}, {"seed", std::uint64_t{0}}, {"out", ""}}));
  Command score(app, "score", "Print one score per input clip",
                merged(sampling_keys(), {{"checkpoint", ""}, {"n_samples", 1}, {"seed", std::uint64_t{0}}}));
  std::vector<std::string> score_inputs;
  score.app->add_option("inputs", score_inputs, "clips (.fvc or .y4m)");
  Command mapc(app, "map", "Export a patch-wise quality map and overlay",
               merged(sampling_keys(), {{"checkpoint", ""}, {"in", ""}, {"seed", std::uint64_t{0}},
                                        {"score_lo", 1.0}, {"score_hi", 5.0}, {"out", ""}}));
  Command stab(app, "stability", "Single-sampling stability against a seeded ensemble",
               merged(sampling_keys(), {{"checkpoint", ""}, {"manifest", ""}, {"split", "test"}, {"repeats", 16},
                                        {"ensemble", 6}, {"seed", std::uint64_t{0}}, {"label_range", 4.0},
                                        {"out", ""}}));
  Command sweep(app, "sweep", "Metrics per resolution group",
                merged(sampling_keys(), {{"checkpoint", ""}, {"split", ""}, {"n_samples", 1},
                                         {"seed", std::uint64_t{0}}, {"out", ""}}));
  std::vector<std::string> sweep_groups;
  sweep.app->add_option("--group", sweep_groups, "name=manifest, repeatable");
  Command flops(app, "flops", "Analytic multiply-accumulate count",
                {{"preset", "standard"}, {"gf", 7}, {"sf", 32}, {"t", 32}, {"height", 1080}, {"width", 1920},
                 {"full_resolution", false}, {"out", ""}});

  std::vector<Command*> all{&synth, &frags, &trainc, &evalc, &score, &mapc, &stab, &sweep, &flops};
  for (Command* c : all) c->app->add_flag("--force", c->force, "allow writing into a non-empty --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage_error", e.what());
  }

  try {
    if (*synth.app) return cmd_synth(synth);
    if (*frags.app) return cmd_fragments(frags);
    if (*trainc.app) return cmd_train(trainc);
    if (*evalc.app) return cmd_eval(evalc);
    if (*score.app) return cmd_score(score, score_inputs);
    if (*mapc.app) return cmd_map(mapc);
    if (*stab.app) return cmd_stability(stab);
    if (*sweep.app) return cmd_sweep(sweep, sweep_groups);
    if (*flops.app) return cmd_flops(flops);
  } catch (const Error& e) {
    return report(e.error_class(), e.what());
  } catch (const json::exception& e) {
    return report("config_error", e.what());
  } catch (const std::exception& e) {
    return report("internal_error", e.what());
  }
  return report("usage_error", "no subcommand given");
}
