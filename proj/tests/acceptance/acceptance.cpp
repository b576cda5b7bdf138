// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: fragq_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fragq/errors.hpp"
#include "fragq/fanet.hpp"
#include "fragq/flops.hpp"
#include "fragq/harness.hpp"
#include "fragq/manifest.hpp"
#include "fragq/metrics.hpp"
#include "fragq/rng.hpp"
#include "fragq/sampling.hpp"
#include "fragq/synth.hpp"
#include "gms_properties.hpp"
#include "model_checks.hpp"
#include "test_util.hpp"

using namespace fragq;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---- 1. identity -----------------------------------------------------------

Outcome gms_identity() {
  const auto t0 = Clock::now();
  Rng pick(101);
  int bad = 0;
  for (int s = 0; s < 100; ++s) {
    const int g = pick.uniform_int(1, 7), p = pick.uniform_int(1, 32);
    const int t = pick.uniform_int(1, 4), c = pick.uniform_int(0, 1) ? 3 : 1;
    const VideoClip clip = test::random_clip(t, g * p, g * p, c, 1000 + s);
    const FragmentBatch b = sample_gms(clip, GridSpec{g, p, t}, mix_seed(7, s));
    if (b.data != clip.pixels) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 10, fmt("%d/100 seeds not identical, %.2fs (limit 10s)", bad, secs)};
}

// ---- 2. structure ----------------------------------------------------------

Outcome gms_structure() {
  const auto t0 = Clock::now();
  Rng pick(202);
  int bad = 0;
  std::string first;
  for (int s = 0; s < 500; ++s) {
    const int g = pick.uniform_int(1, 8), p = pick.uniform_int(1, 16), t = pick.uniform_int(1, 4);
    const int h = g * p + pick.uniform_int(0, 40), w = g * p + pick.uniform_int(0, 40);
    const VideoClip clip = test::random_clip(t, h, w, 3, 5000 + s);
    const GridSpec spec{g, p, t};
    const std::string e = test::check_gms(clip, spec, sample_gms(clip, spec, mix_seed(9, s)));
    if (!e.empty()) {
      if (first.empty()) first = fmt(" first: %s at %dx%d G=%d S=%d T=%d", e.c_str(), h, w, g, p, t);
      ++bad;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 60, fmt("%d/500 configs violate a property, %.2fs (limit 60s)%s", bad, secs, first.c_str())};
}

// ---- 3. information ratio --------------------------------------------------

Outcome information_ratio() {
  const GridSpec spec{7, 32, 1};
  VideoClip clip(1, 1080, 1920, 1, "hd");
  const FragmentBatch b = sample_gms(clip, spec, 3);
  std::vector<char> seen(static_cast<std::size_t>(1080) * 1920, 0);
  long long kept = 0;
  for (int k = 0; k < b.plan.slots(); ++k) {
    const Rect r = b.plan.source_rect(0, k);
    for (int y = r.row0; y < r.row1; ++y)
      for (int x = r.col0; x < r.col1; ++x) kept += !seen[static_cast<std::size_t>(y) * 1920 + x]++;
  }
  const long long total = 1080LL * 1920;
  // 50176 / 2073600 reduces to 49 / 2025.
  const bool exact = kept == 50176 && total == 2073600 && kept * 2025 == total * 49;
  const double pct = 100.0 * static_cast<double>(kept) / static_cast<double>(total);
  const bool rounds = std::abs(pct - 2.4) < 0.05;
  return {exact && rounds, fmt("kept %lld of %lld pixels = %.4f%%", kept, total, pct)};
}

// ---- 4. GRPB degeneracy ----------------------------------------------------

FanetConfig random_tiny(Rng& rng) {
  FanetConfig c = tiny_preset();
  c.preset = "custom";
  const int h0 = rng.uniform_int(1, 2);
  c.heads = {h0, 2, 2, rng.uniform_int(0, 1) ? 2 : 4};
  c.embed_dim = 4 * rng.uniform_int(1, 4);
  const int wt = rng.uniform_int(1, 2), ws = rng.uniform_int(0, 1) ? 2 : 4;
  c.window = {wt, ws, ws};
  c.patch_norm = rng.uniform_int(0, 1) == 1;
  return c;
}

Outcome grpb_degeneracy() {
  Rng rng(404);
  double worst = 0;
  for (int s = 0; s < 50; ++s) {
    FanetConfig gated = random_tiny(rng);
    FanetConfig plain = gated;
    plain.grpb_stages = {false, false, false, false};
    Fanet a(gated, 100 + s);
    test::randomize_zero_params(a, 200 + s, 0.5);
    for (nn::Param* p : a.parameters())
      if (p->name.ends_with("pseudo_table"))
        p->value = a.find(p->name.substr(0, p->name.size() - 12) + "real_table")->value;
    Fanet b(plain, 100 + s);
    for (nn::Param* p : b.parameters()) p->value = a.find(p->name)->value;
    const int frames = 2 * rng.uniform_int(1, 2);
    const auto batch = test::random_batch(frames, 64, 3, 300 + s);
    worst = std::max(worst, std::abs(a.forward(batch).score - b.forward(batch).score));
  }
  // Witness: different tables under a mixed gate move the output.
  FanetConfig gated = random_tiny(rng);
  FanetConfig plain = gated;
  plain.grpb_stages = {false, false, false, false};
  Fanet w(gated, 7);
  test::randomize_zero_params(w, 8, 0.5);
  Fanet b(plain, 7);
  for (nn::Param* p : b.parameters()) p->value = w.find(p->name)->value;
  for (nn::Param* p : w.parameters())
    if (p->name.ends_with("pseudo_table")) p->value *= -3.0;
  const auto batch = test::random_batch(2, 64, 3, 9);
  const double gap = std::abs(w.forward(batch).score - b.forward(batch).score);
  return {worst < 1e-10 && gap > 1e-9, fmt("max |gated - plain| over 50 configs %.3g (limit 1e-10); witness gap %.3g",
                                           worst, gap)};
}

// ---- 5. gradients ----------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  Rng rng(505);
  double loss_worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(3, 32);
    std::vector<double> p(n), g(n);
    for (int i = 0; i < n; ++i) {
      p[i] = rng.normal();
      g[i] = rng.normal();
    }
    const PlccLoss l = plcc_loss(p, g);
    double diff = 0, na = 0, nn_ = 0;
    for (int i = 0; i < n; ++i) {
      const double keep = p[i], h = 1e-5;
      p[i] = keep + h;
      const double up = plcc_loss(p, g).loss;
      p[i] = keep - h;
      const double dn = plcc_loss(p, g).loss;
      p[i] = keep;
      const double num = (up - dn) / (2 * h);
      diff += (num - l.grad[i]) * (num - l.grad[i]);
      na += l.grad[i] * l.grad[i];
      nn_ += num * num;
    }
    loss_worst = std::max(loss_worst, std::sqrt(diff / std::max(na, nn_)));
  }

  Fanet m(tiny_preset(), 5);
  test::randomize_zero_params(m, 6);
  const auto rel = test::gradient_check(m, test::random_batch(2, 64, 3, 2), 3, 1e-3, 7);
  double net_worst = 0;
  std::string worst_name;
  bool real = false, pseudo = false, head = false;
  for (const auto& [name, err] : rel) {
    if (err > net_worst) {
      net_worst = err;
      worst_name = name;
    }
    real |= name.ends_with("real_table");
    pseudo |= name.ends_with("pseudo_table");
    head |= name.starts_with("head.");
  }
  const double secs = seconds_since(t0);
  const bool ok = loss_worst < 1e-6 && net_worst < 1e-4 && real && pseudo && head && secs < 120;
  return {ok, fmt("plcc_loss rel %.2g (limit 1e-6); tiny net worst rel %.2g at %s over %zu tensors "
                  "(limit 1e-4, step 1e-3); %.1fs (limit 120s)",
                  loss_worst, net_worst, worst_name.c_str(), rel.size(), secs)};
}

// ---- 6. metric oracles -----------------------------------------------------

double brute_plcc(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> brute_ranks(const std::vector<double>& a) {
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double less = 0, same = 0;
    for (double v : a) {
      less += v < a[i];
      same += v == a[i];
    }
    r[i] = less + (same + 1) / 2;
  }
  return r;
}

double brute_krcc(const std::vector<double>& a, const std::vector<double>& b) {
  double con = 0, dis = 0, ta = 0, tb = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double x = (a[i] > a[j]) - (a[i] < a[j]), y = (b[i] > b[j]) - (b[i] < b[j]);
      if (x == 0 && y == 0) continue;
      if (x == 0) ++ta;
      else if (y == 0) ++tb;
      else if (x == y) ++con;
      else ++dis;
    }
  return (con - dis) / std::sqrt((con + dis + ta) * (con + dis + tb));
}

Outcome metric_oracles() {
  Rng rng(606);
  double worst = 0;
  int checked = 0;
  while (checked < 1000) {
    const int n = rng.uniform_int(2, 60);
    const bool ties = rng.uniform_int(0, 1) == 1;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = ties ? rng.uniform_int(0, 5) : rng.normal();
      b[i] = ties ? rng.uniform_int(0, 5) : a[i] * rng.uniform(-1, 1) + rng.normal();
    }
    if (std::adjacent_find(a.begin(), a.end(), std::not_equal_to<>()) == a.end() ||
        std::adjacent_find(b.begin(), b.end(), std::not_equal_to<>()) == b.end())
      continue;
    worst = std::max({worst, std::abs(plcc(a, b) - brute_plcc(a, b)),
                      std::abs(srcc(a, b) - brute_plcc(brute_ranks(a), brute_ranks(b))),
                      std::abs(krcc(a, b) - brute_krcc(a, b))});
    ++checked;
  }
  const std::vector<double> x{1, 2, 3}, y{1, 3, 2};
  const double hp = plcc(x, y), hs = srcc(x, y), hk = krcc(x, y);
  const bool hand = std::abs(hp - 0.5) < 1e-12 && std::abs(hs - 0.5) < 1e-12 && std::abs(hk - 1.0 / 3) < 1e-12;
  return {worst < 1e-12 && hand,
          fmt("max |fast - brute| %.2g over 1000 pairs (limit 1e-12); hand example %.15g / %.15g / %.15g", worst, hp,
              hs, hk)};
}

// ---- 7. IP-NLR identities --------------------------------------------------

Outcome head_identities() {
  Rng rng(707);
  int bad = 0, perm_bad = 0;
  for (int s = 0; s < 20; ++s) {
    Fanet m(random_tiny(rng), 40 + s);
    test::randomize_zero_params(m, 50 + s, 0.3);
    const int grids = rng.uniform_int(0, 1) ? 2 : 4;
    const QualityOutput o = m.forward(test::random_batch(2 * rng.uniform_int(1, 2), 32 * grids, 3, 60 + s, grids));
    if (!(o.score == pooled_mean(o.quality_map) && o.score == pooled_mean(o.regressed))) ++bad;
    std::vector<double> cells = o.quality_map;
    for (int k = 0; k < 20; ++k) {
      const auto perm = seeded_permutation(static_cast<int>(cells.size()), mix_seed(s, k));
      std::vector<double> shuffled(cells.size());
      for (std::size_t i = 0; i < cells.size(); ++i) shuffled[i] = cells[static_cast<std::size_t>(perm[i])];
      if (pooled_mean(shuffled) != o.score) ++perm_bad;
    }
  }
  return {bad == 0 && perm_bad == 0,
          fmt("%d/20 models break score == mean(map) == mean(regressed); %d/400 cell permutations change the score",
              bad, perm_bad)};
}

// ---- 8. cost -----------------------------------------------------------------

Outcome resolution_cost() {
  const FanetConfig cfg = standard_preset();
  const GridSpec spec{7, 32, 32};
  const auto a = fragment_flops(cfg, spec, 540, 960).total, b = fragment_flops(cfg, spec, 720, 1280).total,
             c = fragment_flops(cfg, spec, 1080, 1920).total;
  const bool constant = a == b && b == c;
  const double g = static_cast<double>(c) * 1e-9;
  const bool near279 = std::abs(g - 279.0) <= 0.15 * 279.0;
  const double full = static_cast<double>(flops_count(cfg, 32, 1080, 1920).backbone());
  const double small = static_cast<double>(flops_count(cfg, 32, 224, 224).backbone());
  const double ratio = full / small;
  const bool near42 = std::abs(ratio - 42.5) <= 0.1 * 42.5;
  return {constant && near279 && near42,
          fmt("540P/720P/1080P identical: %s; standard preset %.2fG MACs vs 279G (%s, limit 15%%); "
              "full-res/224^2 backbone ratio %.2f vs 42.5 (%s, limit 10%%)",
              constant ? "yes" : "no", g, near279 ? "ok" : "out of range", ratio, near42 ? "ok" : "out of range")};
}

// ---- 9 and 10. training ------------------------------------------------------

Dataset pick_split(const std::vector<LabeledClip>& corpus, const std::vector<std::string>& splits, const char* name,
                   int frames) {
  Dataset d;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (splits[i] == name) {
      d.ids.push_back(corpus[i].clip.source_id);
      d.clips.push_back(select_frames(corpus[i].clip, frames));
      d.mos.push_back(corpus[i].label.mos);
    }
  return d;
}

struct Corpus {
  Dataset train, val, test;
};

Corpus make_corpus(const DistortionProfile& profile, int frames) {
  const auto clips = synthesize_corpus(200, 11, profile);
  std::vector<std::string> ids;
  for (const auto& c : clips) ids.push_back(c.clip.source_id);
  const auto splits = assign_splits(ids);
  return {pick_split(clips, splits, "train", frames), pick_split(clips, splits, "val", frames),
          pick_split(clips, splits, "test", frames)};
}

struct TrainedRun {
  Fanet model;
  double test_srcc = 0;
  double secs = 0;
};

TrainedRun train_and_test(const Corpus& c, Variant variant, SamplingSetup ss) {
  const auto t0 = Clock::now();
  ss.variant = variant;
  TrainResult r = train(c.train, c.val, TrainConfig{}, tiny_preset(), ss);
  const EvalRecord ev = evaluate(r.model, c.test, ss, {1});
  return {std::move(r.model), ev.srcc, seconds_since(t0)};
}

DistortionProfile blur_profile() {
  DistortionProfile p;
  p.noise_max = 0;
  p.shake_max = 0;
  p.blur_max = 3.0;
  p.coverage_min = 0.3;
  p.coverage_max = 0.6;
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto want = [&](int k) { return only.empty() || only.count(k) > 0; };

  int failures = 0;
  const auto report = [&](int k, const char* name, const Outcome& o) {
    std::printf("C%-2d %s %s: %s\n", k, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  const auto run = [&](int k, const char* name, const std::function<Outcome()>& f) {
    if (!want(k)) return;
    try {
      report(k, name, f());
    } catch (const std::exception& e) {
      report(k, name, {false, std::string("exception: ") + e.what()});
    }
  };

  run(1, "gms_identity", gms_identity);
  run(2, "gms_structure", gms_structure);
  run(3, "information_ratio", information_ratio);
  run(4, "grpb_degeneracy", grpb_degeneracy);
  run(5, "gradient_checks", gradients);
  run(6, "metric_oracles", metric_oracles);
  run(7, "ip_nlr_identities", head_identities);
  run(8, "resolution_independent_cost", resolution_cost);

  if (want(9) || want(10)) {
    const SamplingSetup ss;
    std::optional<TrainedRun> main_run;
    try {
      main_run = train_and_test(make_corpus(DistortionProfile{}, ss.grid.frames), Variant::gms, ss);
    } catch (const std::exception& e) {
      report(9, "learnability", {false, std::string("exception: ") + e.what()});
    }
    if (main_run && want(9)) {
      std::string blur_detail;
      bool blur_ok = false;
      try {
        const Corpus blur = make_corpus(blur_profile(), ss.grid.frames);
        const TrainedRun g = train_and_test(blur, Variant::gms, ss);
        const TrainedRun r = train_and_test(blur, Variant::resize, ss);
        blur_ok = g.test_srcc >= r.test_srcc && g.secs < 900 && r.secs < 900;
        blur_detail = fmt("blur corpus gms %.3f vs resize %.3f (%.0fs, %.0fs)", g.test_srcc, r.test_srcc, g.secs, r.secs);
      } catch (const std::exception& e) {
        blur_detail = std::string("blur comparison exception: ") + e.what();
      }
      const bool main_ok = main_run->test_srcc >= 0.8 && main_run->secs < 900;
      report(9, "learnability",
             {main_ok && blur_ok, fmt("default corpus test SRCC %.3f (limit 0.8) in %.0fs (limit 900s); %s",
                                      main_run->test_srcc, main_run->secs, blur_detail.c_str())});
    }
    if (main_run) {
      run(10, "stability", [&]() -> Outcome {
        const Corpus c = make_corpus(DistortionProfile{}, ss.grid.frames);
        const StabilityRecord st = stability_analysis(main_run->model, c.test, ss, 16, 6, 3);
        const bool ok = st.pair_accuracy >= 0.95 && std::isfinite(st.normalized_std);
        return {ok, fmt("pair accuracy %.4f over %lld pairs (limit 0.95); normalized std %.5f", st.pair_accuracy,
                        static_cast<long long>(st.pairs), st.normalized_std)};
      });
    }
  }

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
