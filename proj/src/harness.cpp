#include "fragq/harness.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "fragq/checkpoint.hpp"
#include "fragq/errors.hpp"
#include "fragq/metrics.hpp"
#include "fragq/rng.hpp"

namespace fragq {

using nlohmann::json;

namespace {

// Running mean: exact when all inputs are equal.
double running_mean(std::span<const double> v) {
  double m = 0;
  for (std::size_t i = 0; i < v.size(); ++i) m += (v[i] - m) / static_cast<double>(i + 1);
  return m;
}

double sample_std(std::span<const double> v) {
  const double m = running_mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct Correlations {
  double srcc = 0, plcc = 0, krcc = 0;
};

// Validation may see constant predictions early on; report 0 then.
Correlations safe_correlations(std::span<const double> pred, std::span<const double> gt) {
  Correlations c;
  try {
    c.srcc = srcc(pred, gt);
    c.plcc = plcc(pred, gt);
    c.krcc = krcc(pred, gt);
  } catch (const DegenerateError&) {
    c = {};
  }
  return c;
}

void append_line(const std::filesystem::path& path, const json& record) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot append to " + path.string());
  os << record.dump() << "\n";
}

bool grads_finite(Fanet& model) {
  for (nn::Param* p : model.parameters())
    if (!p->grad.allFinite()) return false;
  return true;
}

[[noreturn]] void abort_non_finite(const TrainOutputs& out, int epoch, int batch_index,
                                   const std::vector<std::size_t>& members, const Dataset& data,
                                   const std::vector<FragmentBatch>& fragments, const std::vector<double>& preds,
                                   const std::string& what) {
  std::string where;
  if (!out.dump_dir.empty()) {
    const auto dir = out.dump_dir / ("nonfinite_e" + std::to_string(epoch) + "_b" + std::to_string(batch_index));
    std::filesystem::create_directories(dir);
    json info{{"epoch", epoch}, {"batch", batch_index}, {"reason", what}, {"videos", json::array()}};
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto i = members[k];
      const std::string file = "item" + std::to_string(k) + ".frg";
      save_fragments((dir / file).string(), fragments[k]);
      info["videos"].push_back({{"id", data.ids[i]},
                                {"mos", data.mos[i]},
                                {"prediction", std::isfinite(preds[k]) ? json(preds[k]) : json(nullptr)},
                                {"fragments", file}});
    }
    std::ofstream(dir / "batch.json") << info.dump(2) << "\n";
    where = " (batch dumped to " + dir.string() + ")";
  }
  throw NonFiniteError(what + " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                       where);
}

}  // namespace

Dataset load_dataset(const Manifest& manifest, const std::string& split, int frames) {
  Dataset d;
  for (const auto& e : manifest.entries) {
    if (!split.empty() && e.split != split) continue;
    VideoClip clip = select_frames(load_clip(manifest.resolve(e)), frames);
    d.ids.push_back(clip.source_id);
    d.mos.push_back(e.mos);
    d.clips.push_back(std::move(clip));
  }
  if (d.clips.empty())
    throw ConfigError("manifest has no entries" + (split.empty() ? std::string() : " in split '" + split + "'"));
  return d;
}

std::uint64_t video_seed(std::uint64_t run_seed, const std::string& id) { return mix_seed(run_seed, fnv1a(id)); }

FragmentBatch sample_for(const VideoClip& clip, const std::string& id, const SamplingSetup& s,
                         std::uint64_t run_seed) {
  return sample(clip, s.grid, s.variant, video_seed(run_seed, id), s.options);
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (the PLCC loss needs two points)");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& tc, const FanetConfig& mc,
                  const SamplingSetup& ss, const TrainOutputs& outputs) {
  tc.validate();
  if (train_set.size() < 2) throw ConfigError("training needs at least two videos");
  if (val_set.size() < 2) throw ConfigError("validation needs at least two videos");

  Fanet model(mc, tc.init_seed);
  nn::AdamW opt(model.parameters(), {tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
  TrainResult result{model, 0, -2.0, {}};

  // Batches of batch_size; a trailing singleton joins the previous batch.
  const std::size_t n = train_set.size();
  const std::size_t bs = static_cast<std::size_t>(tc.batch_size);
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t b = 0; b < n; b += bs) spans.emplace_back(b, std::min(n, b + bs));
  if (spans.size() > 1 && spans.back().second - spans.back().first == 1) {
    spans.pop_back();
    spans.back().second = n;
  }
  const double total_steps = static_cast<double>(spans.size()) * tc.epochs;
  std::int64_t step = 0;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const std::vector<int> order = seeded_permutation(static_cast<int>(n), mix_seed(tc.seed, 0x5e00 + epoch));
    const std::uint64_t plan_seed = tc.redraw_plan_per_iter ? mix_seed(tc.seed, 0x9a00 + epoch) : tc.seed;
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t bi = 0; bi < spans.size(); ++bi) {
      const double lr = 0.5 * tc.lr * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      if (bi == 0) rec.lr = lr;
      std::vector<std::size_t> members;
      for (std::size_t k = spans[bi].first; k < spans[bi].second; ++k)
        members.push_back(static_cast<std::size_t>(order[k]));
      std::vector<FragmentBatch> frags;
      std::vector<ForwardTrace> traces(members.size());
      std::vector<double> preds, gt;
      for (std::size_t k = 0; k < members.size(); ++k) {
        const auto i = members[k];
        frags.push_back(sample_for(train_set.clips[i], train_set.ids[i], ss, plan_seed));
        preds.push_back(model.forward(frags.back(), &traces[k]).score);
        gt.push_back(train_set.mos[i]);
      }
      for (double p : preds)
        if (!std::isfinite(p))
          abort_non_finite(outputs, epoch, static_cast<int>(bi), members, train_set, frags, preds,
                           "non-finite prediction");
      const PlccLoss loss = plcc_loss(preds, gt);
      if (!std::isfinite(loss.loss))
        abort_non_finite(outputs, epoch, static_cast<int>(bi), members, train_set, frags, preds, "non-finite loss");
      model.zero_grad();
      for (std::size_t k = 0; k < members.size(); ++k) model.backward(traces[k], loss.grad[k]);
      if (!grads_finite(model))
        abort_non_finite(outputs, epoch, static_cast<int>(bi), members, train_set, frags, preds,
                         "non-finite gradient");
      opt.step(lr);
      ++step;
      rec.batch_losses.push_back(loss.loss);
    }
    rec.train_loss = running_mean(rec.batch_losses);

    std::vector<double> val_pred;
    for (std::size_t i = 0; i < val_set.size(); ++i)
      val_pred.push_back(model.forward(sample_for(val_set.clips[i], val_set.ids[i], ss, tc.val_seed)).score);
    const Correlations c = safe_correlations(val_pred, val_set.mos);
    rec.val_srcc = c.srcc;
    rec.val_plcc = c.plcc;

    if (rec.val_srcc > result.best_val_srcc) {
      result.best_val_srcc = rec.val_srcc;
      result.best_epoch = epoch;
      result.model = model;
      if (!outputs.checkpoint.empty())
        save_checkpoint(outputs.checkpoint, model,
                        {{"epoch", epoch}, {"val_srcc", rec.val_srcc}, {"run", outputs.run_info}});
    }
    if (!outputs.metric_log.empty())
      append_line(outputs.metric_log, {{"schema", kMetricLogSchema},
                                       {"kind", "epoch"},
                                       {"epoch", epoch},
                                       {"lr", rec.lr},
                                       {"train_loss", rec.train_loss},
                                       {"val_srcc", rec.val_srcc},
                                       {"val_plcc", rec.val_plcc},
                                       {"run", outputs.run_info}});
    if (outputs.on_epoch) outputs.on_epoch(rec);
    result.log.push_back(std::move(rec));
  }
  return result;
}

std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, int n_samples) {
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  std::vector<std::uint64_t> s;
  for (int k = 0; k < n_samples; ++k) s.push_back(mix_seed(seed, static_cast<std::uint64_t>(k)));
  return s;
}

EvalRecord evaluate(const Fanet& model, const Dataset& data, const SamplingSetup& s,
                    const std::vector<std::uint64_t>& sample_seeds) {
  if (sample_seeds.empty()) throw ConfigError("evaluation needs at least one sample seed");
  if (data.size() < 2) throw ConfigError("evaluation needs at least two videos");
  EvalRecord r;
  r.variant = std::string(variant_name(s.variant));
  r.sample_seeds = sample_seeds;
  r.ids = data.ids;
  r.labels = data.mos;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> raw;
    for (std::uint64_t seed : sample_seeds)
      raw.push_back(model.forward(sample_for(data.clips[i], data.ids[i], s, seed)).score);
    r.scores.push_back(running_mean(raw));
    r.raw_scores.push_back(std::move(raw));
  }
  r.srcc = srcc(r.scores, r.labels);
  r.plcc = plcc(r.scores, r.labels);
  r.krcc = krcc(r.scores, r.labels);
  return r;
}

json to_json(const EvalRecord& r) {
  json videos = json::array();
  for (std::size_t i = 0; i < r.ids.size(); ++i)
    videos.push_back({{"id", r.ids[i]}, {"label", r.labels[i]}, {"score", r.scores[i]}, {"raw", r.raw_scores[i]}});
  return {{"schema", kEvalSchema},
          {"variant", r.variant},
          {"sample_seeds", r.sample_seeds},
          {"metrics", {{"srcc", r.srcc}, {"plcc", r.plcc}, {"krcc", r.krcc}}},
          {"videos", videos}};
}

EvalRecord eval_record_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kEvalSchema) throw DecodeError("not an evaluation record");
    EvalRecord r;
    r.variant = j.at("variant").get<std::string>();
    r.sample_seeds = j.at("sample_seeds").get<std::vector<std::uint64_t>>();
    r.srcc = j.at("metrics").at("srcc").get<double>();
    r.plcc = j.at("metrics").at("plcc").get<double>();
    r.krcc = j.at("metrics").at("krcc").get<double>();
    for (const auto& v : j.at("videos")) {
      r.ids.push_back(v.at("id").get<std::string>());
      r.labels.push_back(v.at("label").get<double>());
      r.scores.push_back(v.at("score").get<double>());
      r.raw_scores.push_back(v.at("raw").get<std::vector<double>>());
    }
    return r;
  } catch (const json::exception& e) {
    throw DecodeError(std::string("malformed evaluation record: ") + e.what());
  }
}

double pair_accuracy(std::span<const double> reference, std::span<const double> candidate, std::int64_t* pairs) {
  if (reference.size() != candidate.size()) throw ContractError("pair_accuracy: length mismatch");
  std::int64_t total = 0, agree = 0;
  for (std::size_t u = 0; u < reference.size(); ++u)
    for (std::size_t v = u + 1; v < reference.size(); ++v) {
      if (reference[u] == reference[v]) continue;
      ++total;
      const double a = reference[u] - reference[v];
      const double b = candidate[u] - candidate[v];
      if ((a > 0 && b > 0) || (a < 0 && b < 0)) ++agree;
    }
  if (pairs != nullptr) *pairs = total;
  return total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
}

StabilityRecord stability_analysis(const Fanet& model, const Dataset& data, const SamplingSetup& s, int n_repeats,
                                   int ensemble_k, std::uint64_t seed, double label_range) {
  if (n_repeats < 2) throw ConfigError("stability analysis needs n_repeats >= 2");
  if (ensemble_k < 1) throw ConfigError("stability analysis needs ensemble_k >= 1");
  if (!(label_range > 0)) throw ConfigError("label_range must be positive");
  const EvalRecord singles = evaluate(model, data, s, derive_seeds(mix_seed(seed, 1), n_repeats));
  const EvalRecord ensemble = evaluate(model, data, s, derive_seeds(mix_seed(seed, 2), ensemble_k));

  StabilityRecord r;
  r.variant = std::string(variant_name(s.variant));
  r.n_repeats = n_repeats;
  r.ensemble_k = ensemble_k;
  r.label_range = label_range;
  r.ids = data.ids;
  r.ensemble_scores = ensemble.scores;
  for (const auto& raw : singles.raw_scores) r.per_video_std.push_back(sample_std(raw));
  r.mean_std = running_mean(r.per_video_std);

  // labels ~ a + slope * ensemble score (least squares).
  const double me = running_mean(r.ensemble_scores);
  const double ml = running_mean(data.mos);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sxy += (r.ensemble_scores[i] - me) * (data.mos[i] - ml);
    sxx += (r.ensemble_scores[i] - me) * (r.ensemble_scores[i] - me);
  }
  r.calibration_slope = sxx > 0 ? sxy / sxx : 0.0;
  r.normalized_std = r.mean_std * std::abs(r.calibration_slope) / label_range;

  double acc = 0;
  for (int rep = 0; rep < n_repeats; ++rep) {
    std::vector<double> single;
    for (const auto& raw : singles.raw_scores) single.push_back(raw[static_cast<std::size_t>(rep)]);
    acc += pair_accuracy(r.ensemble_scores, single, &r.pairs);
  }
  r.pair_accuracy = acc / n_repeats;
  return r;
}

json to_json(const StabilityRecord& r) {
  json videos = json::array();
  for (std::size_t i = 0; i < r.ids.size(); ++i)
    videos.push_back({{"id", r.ids[i]}, {"std", r.per_video_std[i]}, {"ensemble_score", r.ensemble_scores[i]}});
  return {{"schema", kStabilitySchema},
          {"variant", r.variant},
          {"n_repeats", r.n_repeats},
          {"ensemble_k", r.ensemble_k},
          {"label_range", r.label_range},
          {"mean_std", r.mean_std},
          {"calibration_slope", r.calibration_slope},
          {"normalized_std", r.normalized_std},
          {"pair_accuracy", r.pair_accuracy},
          {"pairs", r.pairs},
          {"videos", videos}};
}

std::vector<GroupMetrics> resolution_sweep(const Fanet& model,
                                           const std::vector<std::pair<std::string, Dataset>>& groups,
                                           const SamplingSetup& s, const std::vector<std::uint64_t>& seeds) {
  std::vector<GroupMetrics> out;
  for (const auto& [name, data] : groups) {
    const EvalRecord r = evaluate(model, data, s, seeds);
    out.push_back({name, data.size(), r.srcc, r.plcc, r.krcc});
  }
  return out;
}

json sweep_to_json(const std::vector<GroupMetrics>& groups) {
  json g = json::array();
  for (const auto& m : groups)
    g.push_back({{"group", m.group}, {"videos", m.videos}, {"srcc", m.srcc}, {"plcc", m.plcc}, {"krcc", m.krcc}});
  return {{"schema", kSweepSchema}, {"groups", g}};
}

std::vector<GroupMetrics> sweep_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kSweepSchema) throw DecodeError("not a sweep report");
    std::vector<GroupMetrics> out;
    for (const auto& g : j.at("groups"))
      out.push_back({g.at("group").get<std::string>(), g.at("videos").get<std::size_t>(),
                     g.at("srcc").get<double>(), g.at("plcc").get<double>(), g.at("krcc").get<double>()});
    return out;
  } catch (const json::exception& e) {
    throw DecodeError(std::string("malformed sweep report: ") + e.what());
  }
}

}  // namespace fragq
