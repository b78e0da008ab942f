#include "motionxfer/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "motionxfer/error.hpp"
#include "motionxfer/heatmap.hpp"

namespace mxf {

double mse(const Image& x, const Image& y, const Mask* mask) {
  if (!x.same_shape(y)) throw Error("mse: shape mismatch");
  if (mask && !mask->same_extent(x.height(), x.width())) throw Error("mse: mask extent mismatch");
  double acc = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < x.height(); ++r)
    for (int c = 0; c < x.width(); ++c) {
      if (mask && !mask->at(r, c)) continue;
      for (int ch = 0; ch < x.channels(); ++ch) {
        const double d = static_cast<double>(x.at(r, c, ch)) - y.at(r, c, ch);
        acc += d * d;
      }
      n += static_cast<std::size_t>(x.channels());
    }
  if (n == 0) throw Error("mse: empty mask");
  return acc / static_cast<double>(n);
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPixelMax * kPixelMax / m);
}

namespace {

// "Valid" separable filtering: output covers centres whose window fits.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

std::vector<double> window_taps(const SsimConfig& cfg) {
  std::vector<double> k(cfg.window);
  const int r = cfg.window / 2;
  double s = 0.0;
  for (int i = 0; i < cfg.window; ++i) {
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (cfg.sigma * cfg.sigma));
    s += k[i];
  }
  for (auto& v : k) v /= s;
  return k;
}

}  // namespace

double ssim(const Image& x, const Image& y, const Mask* mask, const SsimConfig& cfg) {
  if (!x.same_shape(y)) throw Error("ssim: shape mismatch");
  if (cfg.window < 1 || cfg.window % 2 == 0) throw Error("ssim: window must be odd");
  const int h = x.height(), w = x.width();
  if (h < cfg.window || w < cfg.window) throw Error("ssim: image smaller than window");
  const auto k = window_taps(cfg);
  const double c1 = (cfg.k1 * kPixelMax) * (cfg.k1 * kPixelMax);
  const double c2 = (cfg.k2 * kPixelMax) * (cfg.k2 * kPixelMax);
  const int r = cfg.window / 2, oh = h - cfg.window + 1, ow = w - cfg.window + 1;
  double total = 0.0;
  std::size_t n = 0;
  const std::size_t npx = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < x.channels(); ++ch) {
    std::vector<double> a(npx), b(npx), aa(npx), bb(npx), ab(npx);
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const std::size_t i = static_cast<std::size_t>(yy) * w + xx;
        a[i] = x.at(yy, xx, ch);
        b[i] = y.at(yy, xx, ch);
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
      }
    const auto ma = filter_valid(a, h, w, k), mb = filter_valid(b, h, w, k);
    const auto saa = filter_valid(aa, h, w, k), sbb = filter_valid(bb, h, w, k);
    const auto sab = filter_valid(ab, h, w, k);
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx) {
        if (mask && !mask->at(yy + r, xx + r)) continue;
        const std::size_t i = static_cast<std::size_t>(yy) * ow + xx;
        const double va = saa[i] - ma[i] * ma[i];
        const double vb = sbb[i] - mb[i] * mb[i];
        const double cov = sab[i] - ma[i] * mb[i];
        total += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) /
                 ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
        ++n;
      }
  }
  if (n == 0) throw Error("ssim: mask selects no valid window centre");
  return total / static_cast<double>(n);
}

FrameMetrics frame_metrics(const Image& x, const Image& y, const Mask* mask, const SsimConfig& cfg) {
  if (mask && !mask->same_extent(x.height(), x.width())) throw Error("frame_metrics: mask extent mismatch");
  if (mask && mask->count() == 0) throw Error("frame_metrics: empty mask");
  FrameMetrics m;
  m.mse = mse(x, y, mask);
  m.psnr = psnr_from_mse(m.mse);
  m.ssim = ssim(x, y, mask, cfg);
  return m;
}

double diff_frame_mse(std::span<const Image> gen, std::span<const Image> gt, std::span<const Mask> masks) {
  if (gen.size() != gt.size()) throw Error("diff_frame_mse: sequence length mismatch");
  if (gen.size() < 2) throw Error("diff_frame_mse: need at least two frames");
  if (!masks.empty() && masks.size() != gen.size()) throw Error("diff_frame_mse: mask count mismatch");
  double acc = 0.0;
  for (std::size_t t = 1; t < gen.size(); ++t) {
    if (!gen[t].same_shape(gt[t]) || !gen[t].same_shape(gen[t - 1])) {
      throw Error("diff_frame_mse: shape mismatch");
    }
    Mask m;
    if (!masks.empty()) {
      const Mask pair[2] = {masks[t], masks[t - 1]};
      m = mask_union(pair);
      if (m.count() == 0) throw Error("diff_frame_mse: empty mask");
    }
    double s = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < gen[t].height(); ++y)
      for (int x = 0; x < gen[t].width(); ++x) {
        if (!masks.empty() && !m.at(y, x)) continue;
        for (int c = 0; c < gen[t].channels(); ++c) {
          // (g_t - g_{t-1}) - (r_t - r_{t-1}) regrouped as residual differences.
          const double e1 = static_cast<double>(gen[t].at(y, x, c)) - gt[t].at(y, x, c);
          const double e0 = static_cast<double>(gen[t - 1].at(y, x, c)) - gt[t - 1].at(y, x, c);
          s += (e1 - e0) * (e1 - e0);
          ++n;
        }
      }
    acc += s / static_cast<double>(n);
  }
  return acc / static_cast<double>(gen.size() - 1);
}

std::vector<NoveltyPoint> novelty_curve(std::span<const Pose2D> test_poses, std::span<const double> test_ssim,
                                        std::span<const Pose2D> train_poses, int k) {
  if (test_poses.size() != test_ssim.size()) throw Error("novelty_curve: pose/ssim count mismatch");
  std::vector<NoveltyPoint> out;
  out.reserve(test_poses.size());
  for (std::size_t i = 0; i < test_poses.size(); ++i) {
    out.push_back({nearest_training_pose(test_poses[i], train_poses, k).novelty, test_ssim[i]});
  }
  return out;
}

double finite_mean(std::span<const double> values, std::size_t* excluded) {
  double acc = 0.0;
  std::size_t n = 0, skipped = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      acc += v;
      ++n;
    } else {
      ++skipped;
    }
  }
  if (excluded) *excluded = skipped;
  return n ? acc / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

namespace {

RegionSummary summarize(const std::vector<FrameMetrics>& rows) {
  RegionSummary s;
  if (rows.empty()) return s;
  std::vector<double> m, p, q;
  for (const auto& r : rows) {
    m.push_back(r.mse);
    p.push_back(r.psnr);
    q.push_back(r.ssim);
  }
  s.mse = finite_mean(m);
  s.psnr = finite_mean(p, &s.psnr_inf);
  s.ssim = finite_mean(q);
  return s;
}

nlohmann::json metrics_json(const FrameMetrics& m) {
  return {{"mse", m.mse}, {"psnr", format_psnr(m.psnr)}, {"ssim", m.ssim}};
}

nlohmann::json summary_json(const RegionSummary& s) {
  return {{"mse", s.mse}, {"psnr", format_psnr(s.psnr)}, {"ssim", s.ssim}, {"psnr_inf_count", s.psnr_inf}};
}

}  // namespace

std::string format_psnr(double psnr) {
  if (std::isinf(psnr)) return "inf";
  std::ostringstream os;
  os << std::setprecision(10) << psnr;
  return os.str();
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < whole.size(); ++i) {
    nlohmann::json row = {{"name", i < names.size() ? names[i] : std::to_string(i)},
                          {"whole", metrics_json(whole[i])}};
    if (i < foreground.size()) row["foreground"] = metrics_json(foreground[i]);
    frames.push_back(std::move(row));
  }
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : novelty) curve.push_back({p.novelty, p.ssim});
  return {{"frames", std::move(frames)},
          {"whole", summary_json(whole_summary)},
          {"foreground", summary_json(foreground_summary)},
          {"diff_frame_mse", {{"whole", diff_mse_whole}, {"foreground", diff_mse_foreground}}},
          {"novelty_curve", std::move(curve)}};
}

std::string EvalReport::to_table(const std::string& method) const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  auto row = [&](const RegionSummary& s) {
    os << std::left << std::setw(16) << method << std::right << std::setw(12) << s.mse << std::setw(12)
       << format_psnr(s.psnr) << std::setw(10) << s.ssim << '\n';
  };
  os << "Whole frame\n" << std::left << std::setw(16) << "" << std::right << std::setw(12) << "MSE"
     << std::setw(12) << "PSNR" << std::setw(10) << "SSIM" << '\n';
  row(whole_summary);
  os << "\nForeground\n" << std::left << std::setw(16) << "" << std::right << std::setw(12) << "MSE"
     << std::setw(12) << "PSNR" << std::setw(10) << "SSIM" << '\n';
  row(foreground_summary);
  os << "\nDifference-frame MSE\n" << std::left << std::setw(16) << "" << std::right << std::setw(14)
     << "Whole frame" << std::setw(14) << "Foreground" << '\n'
     << std::left << std::setw(16) << method << std::right << std::setw(14) << diff_mse_whole << std::setw(14)
     << diff_mse_foreground << '\n';
  if (whole_summary.psnr_inf + foreground_summary.psnr_inf > 0) {
    os << "\n(" << whole_summary.psnr_inf << " whole / " << foreground_summary.psnr_inf
       << " foreground frames had zero error and are excluded from the PSNR mean)\n";
  }
  return os.str();
}

std::string EvalReport::novelty_csv() const {
  std::ostringstream os;
  os << std::setprecision(10) << "novelty,ssim\n";
  for (const auto& p : novelty) os << p.novelty << ',' << p.ssim << '\n';
  return os.str();
}

EvalReport evaluate_sequences(std::span<const Image> gen, std::span<const Image> gt,
                              std::span<const Mask> fg_masks, std::vector<std::string> names) {
  if (gen.size() != gt.size()) throw Error("evaluate: frame count mismatch");
  if (!fg_masks.empty() && fg_masks.size() != gen.size()) throw Error("evaluate: mask count mismatch");
  EvalReport rep;
  rep.names = std::move(names);
  std::vector<Image> g8, r8;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    g8.push_back(to_byte_scale(quantize(gen[i])));
    r8.push_back(to_byte_scale(quantize(gt[i])));
    rep.whole.push_back(frame_metrics(g8.back(), r8.back()));
    if (!fg_masks.empty()) rep.foreground.push_back(frame_metrics(g8.back(), r8.back(), &fg_masks[i]));
  }
  rep.whole_summary = summarize(rep.whole);
  rep.foreground_summary = summarize(rep.foreground);
  if (gen.size() >= 2) {
    rep.diff_mse_whole = diff_frame_mse(g8, r8);
    if (!fg_masks.empty()) rep.diff_mse_foreground = diff_frame_mse(g8, r8, fg_masks);
  }
  return rep;
}

}  // namespace mxf
