#include "ovtok/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "ovtok/tensor_io.hpp"

namespace ovtok {

namespace {

constexpr std::uint64_t kProjectionSeed = 0x0bf510a7u;
constexpr int kFixedChannels = 10;

// Fixed random projection of the flattened patch pixels; deterministic per
// (patch, dim) and identical across processes.
const std::vector<double>& projection_matrix(int patch, int extra) {
  static std::map<std::pair<int, int>, std::vector<double>> cache;
  auto& proj = cache[{patch, extra}];
  if (proj.empty() && extra > 0) {
    const int in = patch * patch * 3;
    Rng rng(kProjectionSeed + static_cast<std::uint64_t>(patch) * 1000003u +
            static_cast<std::uint64_t>(extra));
    proj.resize(static_cast<std::size_t>(in) * extra);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : proj) v = rng.normal() * scale;
  }
  return proj;
}

}  // namespace

void FeaturizerConfig::validate() const {
  if (patch < 1 || height % patch != 0 || width % patch != 0)
    throw std::invalid_argument("FeaturizerConfig: patch must divide height and width");
  if (dim < kFixedChannels)
    throw std::invalid_argument("FeaturizerConfig: dim must be at least 10");
}

int FeatureMap::nearest_slice(int frame) const {
  if (frame_indices.empty()) throw std::runtime_error("FeatureMap: no frames");
  int best = 0;
  int best_dist = std::abs(frame_indices[0] - frame);
  for (std::size_t i = 1; i < frame_indices.size(); ++i) {
    const int d = std::abs(frame_indices[i] - frame);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Tensor patch_features(const Image& frame, const FeaturizerConfig& cfg) {
  cfg.validate();
  if (frame.height != cfg.height || frame.width != cfg.width)
    throw std::invalid_argument("patch_features: frame resolution does not match config");
  const int p = cfg.patch, gh = cfg.grid_h(), gw = cfg.grid_w(), D = cfg.dim;
  const int extra = D - kFixedChannels;
  const auto& proj = projection_matrix(p, extra);

  Tensor out({gh, gw, D});
  std::vector<double> pixels(static_cast<std::size_t>(p) * p * 3);
  std::vector<double> gray(static_cast<std::size_t>(p) * p);
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      double mean[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          const auto* rgb = frame.pixel(py * p + y, px * p + x);
          for (int c = 0; c < 3; ++c) {
            const double v = rgb[c] / 255.0;
            pixels[(static_cast<std::size_t>(y) * p + x) * 3 + c] = v;
            mean[c] += v;
            sq[c] += v * v;
          }
          gray[static_cast<std::size_t>(y) * p + x] =
              (rgb[0] + rgb[1] + rgb[2]) / (3.0 * 255.0);
        }
      }
      const double n = static_cast<double>(p) * p;
      double* f = &out.data[(static_cast<std::size_t>(py) * gw + px) * D];
      for (int c = 0; c < 3; ++c) {
        mean[c] /= n;
        f[c] = mean[c];
        const double var = std::max(0.0, sq[c] / n - mean[c] * mean[c]);
        f[3 + c] = std::sqrt(var);
      }
      // Sobel energies over the patch interior
      double ex = 0.0, ey = 0.0;
      if (p >= 3) {
        for (int y = 1; y < p - 1; ++y) {
          for (int x = 1; x < p - 1; ++x) {
            auto g = [&](int yy, int xx) { return gray[static_cast<std::size_t>(yy) * p + xx]; };
            const double gx = -g(y - 1, x - 1) + g(y - 1, x + 1) - 2 * g(y, x - 1) +
                              2 * g(y, x + 1) - g(y + 1, x - 1) + g(y + 1, x + 1);
            const double gy = -g(y - 1, x - 1) - 2 * g(y - 1, x) - g(y - 1, x + 1) +
                              g(y + 1, x - 1) + 2 * g(y + 1, x) + g(y + 1, x + 1);
            ex += std::abs(gx);
            ey += std::abs(gy);
          }
        }
        const double interior = static_cast<double>(p - 2) * (p - 2);
        ex /= interior;
        ey /= interior;
      }
      f[6] = ex;
      f[7] = ey;
      f[8] = (px + 0.5) / gw;
      f[9] = (py + 0.5) / gh;
      for (int e = 0; e < extra; ++e) {
        double s = 0.0;
        const int in = p * p * 3;
        for (int i = 0; i < in; ++i) s += pixels[static_cast<std::size_t>(i)] * proj[static_cast<std::size_t>(i) * extra + e];
        f[kFixedChannels + e] = s;
      }
    }
  }
  return out;
}

FeatureMap featurize_video(const std::vector<Image>& frames, const std::vector<int>& frame_indices,
                           const FeaturizerConfig& cfg, const std::string& video_id) {
  cfg.validate();
  if (frame_indices.empty()) throw std::invalid_argument("featurize_video: no frames selected");
  FeatureMap fm;
  fm.video_id = video_id;
  fm.t = static_cast<int>(frame_indices.size());
  fm.h = cfg.grid_h();
  fm.w = cfg.grid_w();
  fm.dim = cfg.dim;
  fm.frame_indices = frame_indices;
  fm.data.reserve(static_cast<std::size_t>(fm.t) * fm.h * fm.w * fm.dim);
  for (int f : frame_indices) {
    if (f < 0 || f >= static_cast<int>(frames.size()))
      throw std::invalid_argument("featurize_video: frame index out of range");
    const Tensor slice = patch_features(frames[static_cast<std::size_t>(f)], cfg);
    fm.data.insert(fm.data.end(), slice.data.begin(), slice.data.end());
  }
  return fm;
}

namespace {

int nearest_src(int dst, int dst_size, int src_size) {
  const int src = static_cast<int>((dst + 0.5) * src_size / dst_size);
  return std::min(src, src_size - 1);
}

Image nearest_resize(const Image& frame, int out_h, int out_w) {
  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = nearest_src(y, out_h, frame.height);
    for (int x = 0; x < out_w; ++x) {
      const int sx = nearest_src(x, out_w, frame.width);
      const auto* src = frame.pixel(sy, sx);
      auto* dst = out.pixel(y, x);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  }
  return out;
}

Image center_crop(const Image& frame, int target) {
  const int y0 = (frame.height - target) / 2;
  const int x0 = (frame.width - target) / 2;
  if (y0 < 0 || x0 < 0) throw std::invalid_argument("center_crop: frame smaller than target");
  Image out(target, target);
  for (int y = 0; y < target; ++y)
    for (int x = 0; x < target; ++x) {
      const auto* src = frame.pixel(y0 + y, x0 + x);
      auto* dst = out.pixel(y, x);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  return out;
}

}  // namespace

Image resize_policy(const Image& frame, Branch branch, int target) {
  if (branch == Branch::object_centric) {
    if (frame.height == target && frame.width == target) return frame;
    return nearest_resize(frame, target, target);
  }
  // video-centric: scale the shorter side to the target, then center-crop
  const int shorter = std::min(frame.height, frame.width);
  if (shorter == target) return center_crop(frame, target);
  const double scale = static_cast<double>(target) / shorter;
  const int out_h = std::max(target, static_cast<int>(std::lround(frame.height * scale)));
  const int out_w = std::max(target, static_cast<int>(std::lround(frame.width * scale)));
  return center_crop(nearest_resize(frame, out_h, out_w), target);
}

Mask resize_mask(const Mask& mask, int target) {
  if (mask.height == target && mask.width == target) return mask;
  Mask out(target, target);
  for (int y = 0; y < target; ++y) {
    const int sy = nearest_src(y, target, mask.height);
    for (int x = 0; x < target; ++x) {
      const int sx = nearest_src(x, target, mask.width);
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

void write_feature_map(const std::filesystem::path& base, const FeatureMap& fm, int patch) {
  Tensor t({fm.t, fm.h, fm.w, fm.dim}, fm.data);
  write_ortn(base.string() + ".ortn", t, OrtnType::f64);
  nlohmann::json sidecar{
      {"video_id", fm.video_id},
      {"frame_indices", fm.frame_indices},
      {"p", patch},
      {"D", fm.dim},
  };
  std::ofstream os(base.string() + ".json", std::ios::binary);
  if (!os) throw std::runtime_error("write_feature_map: cannot open sidecar");
  os << sidecar.dump(2) << "\n";
}

FeatureMap read_feature_map(const std::filesystem::path& base) {
  const Tensor t = read_ortn(base.string() + ".ortn");
  if (t.rank() != 4) throw std::runtime_error("read_feature_map: expected rank-4 tensor");
  std::ifstream is(base.string() + ".json");
  if (!is) throw std::runtime_error("read_feature_map: cannot open sidecar");
  const auto sidecar = nlohmann::json::parse(is);
  FeatureMap fm;
  fm.video_id = sidecar.at("video_id").get<std::string>();
  fm.frame_indices = sidecar.at("frame_indices").get<std::vector<int>>();
  fm.t = t.dims[0];
  fm.h = t.dims[1];
  fm.w = t.dims[2];
  fm.dim = t.dims[3];
  fm.data = t.data;
  if (static_cast<int>(fm.frame_indices.size()) != fm.t)
    throw std::runtime_error("read_feature_map: sidecar/tensor mismatch");
  return fm;
}

}  // namespace ovtok
