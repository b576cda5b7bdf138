#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fragq/fanet.hpp"
#include "fragq/manifest.hpp"
#include "fragq/sampling.hpp"
#include "json.hpp"

namespace fragq {

inline constexpr const char* kMetricLogSchema = "fragq.metric_log/1";
inline constexpr const char* kEvalSchema = "fragq.eval/1";
inline constexpr const char* kStabilitySchema = "fragq.stability/1";
inline constexpr const char* kSweepSchema = "fragq.sweep/1";

// Clips of one manifest split, frame-selected to the sampler's T.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<VideoClip> clips;
  std::vector<double> mos;

  std::size_t size() const { return clips.size(); }
};

// Loads the entries of `split` ("" for all) and selects `frames` frames per clip.
Dataset load_dataset(const Manifest& manifest, const std::string& split, int frames);

struct SamplingSetup {
  GridSpec grid{4, 32, 8};
  Variant variant = Variant::gms;
  SamplerOptions options;
};

// Seed of one video's draw: depends on the run seed and the video id only.
std::uint64_t video_seed(std::uint64_t run_seed, const std::string& id);

FragmentBatch sample_for(const VideoClip& clip, const std::string& id, const SamplingSetup& s,
                         std::uint64_t run_seed);

struct TrainConfig {
  int batch_size = 16;
  double lr = 3e-4;
  double weight_decay = 0.05;
  int epochs = 20;
  std::uint64_t seed = 0;
  bool redraw_plan_per_iter = true;
  std::uint64_t init_seed = 0;
  std::uint64_t val_seed = 0;  // sampling seed for validation scoring

  void validate() const;  // ConfigError
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_srcc = 0;
  double val_plcc = 0;
  double lr = 0;
  std::vector<double> batch_losses;
};

struct TrainResult {
  Fanet model;  // best-validation parameters
  int best_epoch = 0;
  double best_val_srcc = 0;
  std::vector<EpochRecord> log;
};

struct TrainOutputs {
  std::filesystem::path checkpoint;  // empty: do not write
  std::filesystem::path metric_log;  // JSONL, appended per epoch
  std::filesystem::path dump_dir;    // where a non-finite batch is dumped
  nlohmann::json run_info = nlohmann::json::object();  // embedded in artifacts
  std::function<void(const EpochRecord&)> on_epoch;
};

// PLCC-loss training with AdamW and cosine decay. Deterministic given the
// configs and data. Throws NonFiniteError (after dumping the batch) when the
// loss or a gradient stops being finite.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& tc,
                  const FanetConfig& mc, const SamplingSetup& ss, const TrainOutputs& outputs = {});

struct EvalRecord {
  std::string variant;
  std::vector<std::uint64_t> sample_seeds;
  std::vector<std::string> ids;
  std::vector<double> labels;
  std::vector<double> scores;                   // ensemble mean per video
  std::vector<std::vector<double>> raw_scores;  // [video][sample]
  double srcc = 0, plcc = 0, krcc = 0;
};

// Scores every video once per sample seed and averages. Metrics compare the
// ensemble means with the labels.
EvalRecord evaluate(const Fanet& model, const Dataset& data, const SamplingSetup& s,
                    const std::vector<std::uint64_t>& sample_seeds);
// n_samples seeds derived from `seed`.
std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, int n_samples);

nlohmann::json to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const nlohmann::json& j);

struct StabilityRecord {
  std::string variant;
  int n_repeats = 0;
  int ensemble_k = 0;
  double label_range = 4.0;
  double mean_std = 0;          // raw prediction units
  double calibration_slope = 0; // least-squares fit of ensemble scores to labels
  double normalized_std = 0;    // mean_std * |slope| / label_range
  double pair_accuracy = 0;     // single sampling vs ensemble, averaged over repeats
  std::int64_t pairs = 0;       // pairs with distinct ensemble scores
  std::vector<std::string> ids;
  std::vector<double> per_video_std;
  std::vector<double> ensemble_scores;
};

// Fraction of pairs (u, v) with a[u] != a[v] ordered the same way by b.
// Ties in b count as disagreement. Returns 1 when no pair qualifies.
double pair_accuracy(std::span<const double> reference, std::span<const double> candidate,
                     std::int64_t* pairs = nullptr);

// Requires n_repeats >= 2 and ensemble_k >= 1 (ConfigError).
StabilityRecord stability_analysis(const Fanet& model, const Dataset& data, const SamplingSetup& s, int n_repeats,
                                   int ensemble_k, std::uint64_t seed, double label_range = 4.0);

nlohmann::json to_json(const StabilityRecord& r);

struct GroupMetrics {
  std::string group;
  std::size_t videos = 0;
  double srcc = 0, plcc = 0, krcc = 0;
  bool operator==(const GroupMetrics&) const = default;
};

std::vector<GroupMetrics> resolution_sweep(const Fanet& model,
                                           const std::vector<std::pair<std::string, Dataset>>& groups,
                                           const SamplingSetup& s, const std::vector<std::uint64_t>& seeds);

nlohmann::json sweep_to_json(const std::vector<GroupMetrics>& groups);
std::vector<GroupMetrics> sweep_from_json(const nlohmann::json& j);

}  // namespace fragq
