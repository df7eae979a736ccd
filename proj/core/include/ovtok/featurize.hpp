#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ovtok/mask.hpp"
#include "ovtok/scene.hpp"
#include "ovtok/tensor.hpp"

namespace ovtok {

/// Deterministic hand-crafted patch featurizer standing in for a frozen
/// vision encoder. Zero learnable parameters.
struct FeaturizerConfig {
  int patch = 8;   // p, must divide height and width
  int dim = 32;    // D, at least 10 (fixed stats) channels
  int height = 64;
  int width = 64;
  int context_resolution = 64;  // square target of the video-centric branch

  int grid_h() const { return height / patch; }
  int grid_w() const { return width / patch; }
  void validate() const;
};

struct FeatureMap {
  std::string video_id;
  int t = 0, h = 0, w = 0, dim = 0;
  std::vector<double> data;        // row-major [t, h, w, D]
  std::vector<int> frame_indices;  // sorted, one per t

  const double* at(int ti, int yi, int xi) const {
    return &data[((static_cast<std::size_t>(ti) * h + yi) * w + xi) * dim];
  }
  /// Index into frame_indices of the featurized frame nearest to `frame`
  /// (ties resolve to the earlier one).
  int nearest_slice(int frame) const;
};

/// Per-patch features: mean RGB (3), RGB std (3), horizontal and vertical
/// Sobel energy (2), normalized patch center (2), then a fixed seeded
/// random projection of the patch pixels filling the remaining channels.
Tensor patch_features(const Image& frame, const FeaturizerConfig& cfg);

FeatureMap featurize_video(const std::vector<Image>& frames, const std::vector<int>& frame_indices,
                           const FeaturizerConfig& cfg, const std::string& video_id);

enum class Branch { object_centric, video_centric };

/// Object branch resizes without cropping (nearest neighbor, aspect squash)
/// so features stay aligned with masks; context branch resizes the shorter
/// side and center-crops to the square target.
Image resize_policy(const Image& frame, Branch branch, int target);

/// The object-branch transform applied to a mask (same nearest-neighbor
/// index map), keeping masks aligned with resized frames.
Mask resize_mask(const Mask& mask, int target);

/// ORTN tensor plus a JSON sidecar (video id, frame indices, p, D).
void write_feature_map(const std::filesystem::path& base, const FeatureMap& fm, int patch);
FeatureMap read_feature_map(const std::filesystem::path& base);

}  // namespace ovtok
