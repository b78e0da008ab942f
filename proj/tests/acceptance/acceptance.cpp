// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [--runs DIR] [criterion ...]   (default: all ten)
// Training runs are kept under DIR and reused by later invocations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "helpers.hpp"
#include "motionxfer/compositing.hpp"
#include "motionxfer/dataset.hpp"
#include "motionxfer/heatmap.hpp"
#include "motionxfer/log.hpp"
#include "motionxfer/losses.hpp"
#include "motionxfer/metrics.hpp"
#include "motionxfer/pose.hpp"
#include "motionxfer/render.hpp"
#include "motionxfer/train.hpp"
#include "motionxfer/warp.hpp"
#include "oracles.hpp"

using namespace mxf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome geometry_exactness() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> coord(-200, 200);
  const auto t0 = Clock::now();
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    PartSegment src, dst;
    do {
      src.proximal = {coord(rng), coord(rng)};
      src.distal = {coord(rng), coord(rng)};
      dst.proximal = {coord(rng), coord(rng)};
      dst.distal = {coord(rng), coord(rng)};
    } while (src.length() < 2 * kMinSegmentLength || dst.length() < 2 * kMinSegmentLength);
    const auto m = estimate_part_transform(src, dst);
    worst = std::max({worst, distance(m.apply(src.proximal), dst.proximal), distance(m.apply(src.distal), dst.distal)});
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-9 && secs < 1.0, fmt("max endpoint error %.3g px, %.3f s", worst, secs)};
}

Outcome warper_gradients() {
  std::mt19937_64 rng(202);
  constexpr double kStep = 1e-3;
  const auto t0 = Clock::now();
  double worst = 0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); };
  for (int trial = 0; trial < 50; ++trial) {
    const auto img = fixture::random_image(rng, 8, 8, 3);
    const auto w = fixture::random_image(rng, 8, 8, 3);
    SamplingGrid g(8, 8);
    std::uniform_real_distribution<double> u(-0.9, 7.9);
    for (auto& v : g.coords) {
      do v = u(rng);
      while (std::abs(v - std::round(v)) < 0.01);
    }
    const auto grads = bilinear_sample_backward(img, g, w);
    for (std::size_t i = 0; i < g.coords.size(); ++i) {
      SamplingGrid gp = g, gm = g;
      gp.coords[i] += kStep;
      gm.coords[i] -= kStep;
      const double fd = (oracle::sample_objective(img, gp, w) - oracle::sample_objective(img, gm, w)) / (2 * kStep);
      worst = std::max(worst, rel(grads.grid.coords[i], fd));
    }
    for (std::size_t i = 0; i < img.size(); ++i) {
      Image ip = img, im = img;
      ip.data()[i] += static_cast<float>(kStep);
      im.data()[i] -= static_cast<float>(kStep);
      const double fd = (oracle::sample_objective(ip, g, w) - oracle::sample_objective(im, g, w)) / (2 * kStep);
      worst = std::max(worst, rel(grads.image.data()[i], fd));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-3 && secs < 10.0, fmt("max relative error %.3g, %.2f s", worst, secs)};
}

Outcome pose_volume_contract() {
  std::mt19937_64 rng(303);
  const RasterConfig cfg;
  const int size = 32;
  const double sigma = cfg.resolved_sigma(size, size);
  int channels = 0;
  double lo = 1, hi = 0, peak_err = 0, oracle_err = 0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<PoseVolume> history;
    std::vector<Pose2D> poses;
    for (int k = 0; k < 3; ++k) {
      poses.push_back(fixture::jittered_pose(rng, 16, 17, 6, 0.8));
      history.push_back(build_pose_volume(poses.back(), size, size, cfg));
    }
    const auto stacked = stack_temporal(history, 3);
    channels = stacked.grid.channels();
    for (float v : stacked.grid.data()) {
      lo = std::min(lo, double(v));
      hi = std::max(hi, double(v));
    }
    for (int slot = 0; slot < 3; ++slot) {
      const auto segs = part_segments(poses[slot]);
      for (int c = 0; c < kPoseChannels; ++c) {
        const Image ch = stacked.grid.channel_slice(slot * kPoseChannels + c, 1);
        Image expected(size, size, 1);
        bool present = false;
        if (c < kNumParts) {
          const auto& s = segs[c];
          if (!s.missing) {
            present = true;
            expected = oracle::part_channel(s, size, size, std::max(cfg.min_width, cfg.width_ratio * s.length()), sigma);
          }
        } else {
          const auto& pts = poses[slot].landmarks[c - kNumParts];
          if (!pts.empty()) {
            present = true;
            for (int y = 0; y < size; ++y)
              for (int x = 0; x < size; ++x) {
                double best = 0;
                for (const auto& p : pts)
                  best = std::max(best, std::exp(-((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y)) / (2 * sigma * sigma)));
                expected.at(y, x) = static_cast<float>(best);
              }
            oracle::rescale(expected);
          }
        }
        float peak = 0;
        for (std::size_t i = 0; i < ch.size(); ++i) {
          peak = std::max(peak, ch.data()[i]);
          oracle_err = std::max(oracle_err, std::abs(double(ch.data()[i]) - expected.data()[i]));
        }
        if (present) peak_err = std::max(peak_err, std::abs(double(peak) - 1.0));
      }
    }
  }
  const bool pass = channels == 45 && lo >= 0 && hi <= 1 && peak_err == 0 && oracle_err <= 1e-6;
  return {pass, fmt("%d channels, range [%.3g, %.3g], peak error %.3g, oracle error %.3g", channels, lo, hi, peak_err,
                    oracle_err)};
}

// Worst relative deviation between autograd and central differences.
double fd_error(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x0) {
  const auto x = x0.clone().set_requires_grad(true);
  const auto g = torch::autograd::grad({f(x)}, {x})[0].reshape({-1});
  const double h = 1e-6;
  const auto flat = x0.detach().clone().reshape({-1});
  double worst = 0;
  for (int64_t i = 0; i < flat.numel(); ++i) {
    auto p = flat.clone(), m = flat.clone();
    p[i] += h;
    m[i] -= h;
    const double fd = (f(p.reshape(x0.sizes())).item<double>() - f(m.reshape(x0.sizes())).item<double>()) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i].item<double>()) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

Outcome loss_analytics() {
  const auto t0 = Clock::now();
  torch::manual_seed(404);
  const auto dbl = torch::TensorOptions().dtype(torch::kFloat64);
  using Scores = std::vector<torch::Tensor>;

  // Constant critic.
  bool const_ok = true;
  for (double c : {-1.5, 0.0, 0.3, 2.0}) {
    const Scores s{torch::full({2, 1, 4, 4}, c, dbl), torch::full({2, 1, 2, 2}, c, dbl)};
    const_ok = const_ok && rela_d_loss(s, s).item<double>() == 0.5 && rela_g_loss(s, s).item<double>() == 0.5;
  }

  // Linear-sum critic: the input gradient is all ones.
  const int b = 2, c = 3, h = 8, w = 8;
  Critic linear = [](const torch::Tensor& x, const torch::Tensor&) {
    return Scores{x.sum({1, 2, 3}).reshape({-1, 1, 1, 1})};
  };
  const auto real = torch::randn({b, c, h, w}, dbl), fake = torch::randn({b, c, h, w}, dbl);
  const auto cond = torch::zeros({b, 1, h, w}, dbl);
  const double gp = gradient_penalty(linear, real, fake, cond).item<double>();
  const double gp_err = std::abs(gp - std::pow(std::sqrt(double(h * w * c)) - 1, 2));

  // Distance losses at x = y.
  PassThroughExtractor id;
  RandomPyramidExtractor pyramid(7, {4, 4, 4, 4, 4});
  AuxEncoder pose_enc(4, 15), parse_enc(4, 11);
  pose_enc->to(torch::kFloat64);
  parse_enc->to(torch::kFloat64);
  EncoderExtractor phi_pose(pose_enc), phi_parse(parse_enc);
  const auto y = torch::rand({1, 3, h, w}, dbl) * 2 - 1;
  const std::vector<std::vector<torch::Tensor>> feats{{y, y.mean(1, true)}};
  double at_equality = 0;
  at_equality = std::max(at_equality, feature_matching_loss(feats, feats).item<double>());
  at_equality = std::max(at_equality, perceptual_loss(pyramid, y, y).item<double>());
  at_equality = std::max(at_equality, perceptual_loss(id, y, y).item<double>());
  at_equality = std::max(at_equality, semantic_pose_loss(phi_pose, phi_parse, y, y, 0.01).item<double>());

  // Gradients against central differences, all in double on 8x8 inputs.
  const auto x0 = y + 0.3 * torch::randn({1, 3, h, w}, dbl);
  const Scores real_scores{torch::randn({2, 1, 4, 4}, dbl)};
  const auto fake_scores = torch::randn({2, 1, 4, 4}, dbl);
  // The penalty only reaches the critic's parameters, so differentiate those.
  auto smooth = [](const torch::Tensor& weight) -> Critic {
    return [weight](const torch::Tensor& x, const torch::Tensor&) {
      return Scores{torch::tanh(x * weight).pow(2).sum({1, 2, 3}).reshape({-1, 1, 1, 1})};
    };
  };
  const auto critic_weight = torch::randn({1, c, h, w}, dbl);
  const auto eps = torch::tensor({0.3, 0.7}, dbl);
  double grad_err = 0;
  std::vector<std::pair<const char*, double>> per_loss;
  auto track = [&](const char* name, double e) {
    per_loss.emplace_back(name, e);
    grad_err = std::max(grad_err, e);
  };
  track("rela_d", fd_error([&](const torch::Tensor& f) { return rela_d_loss(real_scores, Scores{f}); }, fake_scores));
  track("rela_g", fd_error([&](const torch::Tensor& f) { return rela_g_loss(real_scores, Scores{f}); }, fake_scores));
  track("gp", fd_error([&](const torch::Tensor& k) { return gradient_penalty(smooth(k), real, fake, cond, eps); },
                      critic_weight));
  track("fm", fd_error([&](const torch::Tensor& x) { return feature_matching_loss(feats, {{x, x.mean(1, true)}}); }, x0));
  track("vgg", fd_error([&](const torch::Tensor& x) { return perceptual_loss(pyramid, y, x); }, x0));
  track("sp", fd_error([&](const torch::Tensor& x) { return semantic_pose_loss(phi_pose, phi_parse, y, x, 0.01); }, x0));

  const double secs = seconds_since(t0);
  std::ostringstream worst;
  for (const auto& [name, e] : per_loss) worst << " " << name << "=" << fmt("%.2g", e);
  const bool pass = const_ok && gp_err <= 1e-6 && at_equality == 0 && grad_err <= 1e-3 && secs < 30;
  return {pass, fmt("constant critic %s, GP error %.3g, max loss at x=y %.3g, FD rel error:", const_ok ? "0.5/0.5" : "WRONG",
                    gp_err, at_equality) +
                    worst.str() + fmt(", %.1f s", secs)};
}

Outcome chroma_round_trip() {
  std::mt19937_64 rng(505);
  const ChromaKeyConfig ck;
  std::uniform_real_distribution<float> u(-1, 1);
  double worst_iou = 1;
  for (int trial = 0; trial < 100; ++trial) {
    const Mask m = fixture::random_mask(rng, 24, 24, 0.45);
    Image fg(24, 24, 3);
    for (int yy = 0; yy < 24; ++yy)
      for (int xx = 0; xx < 24; ++xx) {
        std::array<float, 3> col{};
        double d = 0;
        do {
          for (auto& v : col) v = u(rng);
          d = std::sqrt(std::pow(col[0] - ck.key[0], 2) + std::pow(col[1] - ck.key[1], 2) + std::pow(col[2] - ck.key[2], 2));
        } while (d <= ck.threshold);
        for (int k = 0; k < 3; ++k) fg.at(yy, xx, k) = col[k];
      }
    const Mask back = extract_foreground_mask(over_green(fg, m, ck), ck);
    worst_iou = std::min(worst_iou, back == m ? 1.0 : mask_iou(back, m));
  }
  const auto fg = fixture::random_image(rng, 16, 17, 3), bg = fixture::random_image(rng, 16, 17, 3);
  const bool limits = composite(fg, Mask(16, 17, 1), bg) == fg && composite(fg, Mask(16, 17, 0), bg) == bg;
  return {worst_iou == 1.0 && limits,
          fmt("min IoU %.6f over 100 masks, limits %s", worst_iou, limits ? "bit-exact" : "DIFFER")};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(606);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = fixture::random_image(rng, 16, 16, 3, 0, 255), y = fixture::random_image(rng, 16, 16, 3, 0, 255);
    const auto m = frame_metrics(x, y);
    worst = std::max({worst, std::abs(m.ssim - oracle::ssim(x, y, nullptr)), std::abs(m.mse - oracle::mse(x, y, nullptr)),
                      std::abs(m.psnr - oracle::psnr(oracle::mse(x, y, nullptr)))});
  }
  std::vector<Image> gt, gen;
  for (int t = 0; t < 8; ++t) {
    gt.push_back(fixture::random_image(rng, 16, 16, 3));
    Image shifted = gt.back();
    for (auto& v : shifted.data()) v += 0.25f;
    gen.push_back(shifted);
  }
  const double telescoped = diff_frame_mse(gen, gt);
  return {worst <= 1e-6 && telescoped == 0.0,
          fmt("max deviation from brute force %.3g, constant-offset diff MSE %.3g", worst, telescoped)};
}

// ---------------------------------------------------------------------------
// Training criteria share the two seeded desk runs.

std::shared_ptr<Dataset> desk_video() {
  SceneConfig scene;  // 300 frames, 64 x 64
  auto data = std::make_shared<Dataset>();
  for (auto& f : generate_video(scene, 0)) {
    data->frames.push_back(quantize(f.image));
    data->part_masks.push_back(f.part_masks);
    data->poses.push_back(f.pose);
  }
  data->meta = scene_config_to_json(scene);
  return data;
}

// What the training criteria need from one run. Persisted next to the run so
// separate invocations can share a single training pass.
struct DeskRun {
  double seconds = 0;
  double baseline_ssim = 0, final_ssim = 0;
  std::vector<double> mse_out, mse_comb, fusion_l1;
  nlohmann::json summary;
  std::string metrics_log;
};

DeskRun desk_run(const std::shared_ptr<Dataset>& data, const TrainConfig& cfg, const fs::path& out) {
  fs::remove_all(out);
  fs::create_directories(out);
  TrainOptions opts;
  opts.output = out;
  const TrainSummary s = train(data, cfg, opts);
  DeskRun run;
  run.seconds = s.seconds;
  run.baseline_ssim = s.baseline.mean_ssim;
  run.final_ssim = s.final_eval.mean_ssim;
  run.mse_out = s.final_eval.mse_out;
  run.mse_comb = s.final_eval.mse_comb;
  for (const auto& r : s.log) run.fusion_l1.push_back(r.fusion.l1);
  run.summary = s.final_eval.summary();
  const nlohmann::json record = {{"seconds", run.seconds},         {"baseline_ssim", run.baseline_ssim},
                                 {"final_ssim", run.final_ssim},   {"mse_out", run.mse_out},
                                 {"mse_comb", run.mse_comb},       {"fusion_l1", run.fusion_l1},
                                 {"summary", run.summary}};
  std::ofstream(out / "desk_run.json") << record.dump(1) << "\n";
  run.summary = nlohmann::json::parse(run.summary.dump());  // same form as a reloaded run
  std::ifstream in(out / "metrics.jsonl");
  run.metrics_log.assign(std::istreambuf_iterator<char>(in), {});
  return run;
}

// Reuses a finished run under `out` if one is there, otherwise trains it.
DeskRun cached_desk_run(const TrainConfig& cfg, const fs::path& out) {
  if (fs::exists(out / "desk_run.json")) {
    const auto j = nlohmann::json::parse(std::ifstream(out / "desk_run.json"));
    DeskRun run;
    run.seconds = j.at("seconds");
    run.baseline_ssim = j.at("baseline_ssim");
    run.final_ssim = j.at("final_ssim");
    run.mse_out = j.at("mse_out").get<std::vector<double>>();
    run.mse_comb = j.at("mse_comb").get<std::vector<double>>();
    run.fusion_l1 = j.at("fusion_l1").get<std::vector<double>>();
    run.summary = j.at("summary");
    std::ifstream in(out / "metrics.jsonl");
    run.metrics_log.assign(std::istreambuf_iterator<char>(in), {});
    return run;
  }
  return desk_run(desk_video(), cfg, out);
}

Outcome smoke_criterion(const DeskRun& run, int steps) {
  const auto& l1 = run.fusion_l1;
  const bool complete = static_cast<int>(l1.size()) == steps && l1.size() >= 100;
  const double first = complete ? window_mean(l1, 0, 50) : 0, last = complete ? window_mean(l1, l1.size() - 50, 50) : 0;
  const double gain = run.final_ssim - run.baseline_ssim;
  const bool pass = complete && run.seconds < 30 * 60 && gain >= 0.15 && last < first;
  return {pass, fmt("%zu steps in %.1f min, identity SSIM %.4f -> %.4f (gain %.4f), fusion L1 window %.4f -> %.4f",
                    l1.size(), run.seconds / 60, run.baseline_ssim, run.final_ssim, gain, first, last)};
}

Outcome fusion_benefit(const DeskRun& run) {
  std::size_t wins = 0;
  for (std::size_t i = 0; i < run.mse_out.size() && i < run.mse_comb.size(); ++i) wins += run.mse_out[i] <= run.mse_comb[i];
  const double rate = run.mse_out.empty() ? 0 : double(wins) / double(run.mse_out.size());
  return {rate >= 0.6, fmt("I_out MSE <= I_comb MSE on %zu of %zu held-out pairs (%.3f)", wins, run.mse_out.size(), rate)};
}

Outcome determinism(const DeskRun& a, const DeskRun& b) {
  std::size_t line = 0, first_diff = 0;
  std::istringstream sa(a.metrics_log), sb(b.metrics_log);
  std::string la, lb;
  bool same = true;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(sa, la)), gb = static_cast<bool>(std::getline(sb, lb));
    if (!ga && !gb) break;
    ++line;
    if (ga != gb || la != lb) {
      same = false;
      first_diff = line;
      break;
    }
  }
  const bool summaries = a.summary == b.summary;
  return {same && summaries && line > 0,
          same ? fmt("%zu metric records identical, final summaries %s", line, summaries ? "identical" : "DIFFER")
               : fmt("logs diverge at record %zu", first_diff)};
}

Outcome split_hygiene() {
  TrainConfig cfg;
  std::size_t pairs = 0, leaks = 0, reported = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const Split split = split_and_sample(300, cfg);
    std::set<int> test_frames;
    for (int t = split.test_begin; t < split.test_end; ++t) test_frames.insert(t);
    for (const auto& p : split.train_pairs) {
      ++pairs;
      std::vector<int> used = p.history;
      used.push_back(p.input);
      used.push_back(p.reference);
      for (int t : used) leaks += test_frames.count(t);
    }
    reported += split_violations(split).size();
  }
  return {leaks == 0 && reported == 0 && pairs > 0,
          fmt("%zu training pairs over 20 seeds, %zu test-frame uses", pairs, leaks)};
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  log::set_level(log::Level::kWarn);
  fs::path runs = fs::temp_directory_path() / "mxf_acceptance";
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--runs" && i + 1 < argc)
      runs = argv[++i];
    else
      wanted.insert(std::stoi(arg));
  }
  auto want = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };

  int failures = 0;
  auto report = [&](int id, const char* title, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
  };

  if (want(1)) report(1, "geometry exactness", geometry_exactness);
  if (want(2)) report(2, "warper gradients", warper_gradients);
  if (want(3)) report(3, "pose volume contract", pose_volume_contract);
  if (want(4)) report(4, "loss analytics", loss_analytics);
  if (want(5)) report(5, "chroma round trip", chroma_round_trip);
  if (want(6)) report(6, "metric oracles", metric_oracles);

  if (want(7) || want(8) || want(9)) {
    std::optional<TrainConfig> cfg;
    auto config = [&]() -> const TrainConfig& {
      if (!cfg) cfg = read_train_config(MXF_DESK_CONFIG);
      return *cfg;
    };
    if (want(7))
      report(7, "desk training smoke",
             [&] { return smoke_criterion(cached_desk_run(config(), runs / "run_a"), config().iterations.back()); });
    if (want(8)) report(8, "fusion benefit", [&] { return fusion_benefit(cached_desk_run(config(), runs / "run_a")); });
    if (want(9))
      report(9, "determinism", [&] {
        return determinism(cached_desk_run(config(), runs / "run_a"), cached_desk_run(config(), runs / "run_b"));
      });
  }
  if (want(10)) report(10, "split hygiene", split_hygiene);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
