#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ovtok/featurize.hpp"
#include "ovtok/maskpipe.hpp"
#include "ovtok/nn.hpp"

namespace ovtok {

/// Object mask rasterized to the feature grid.
struct PatchMask {
  int frame = 0;
  int h = 0, w = 0;
  std::vector<std::uint8_t> cells;  // row-major h*w, at least one set

  std::uint8_t at(int y, int x) const { return cells[static_cast<std::size_t>(y) * w + x]; }
  int count() const {
    int n = 0;
    for (auto v : cells) n += v != 0;
    return n;
  }
};

struct EmptyMaskError : std::runtime_error {
  EmptyMaskError() : std::runtime_error("mask_pool: empty patch mask") {}
};

/// Grid cell becomes true when at least half of its pixels are masked; if
/// nothing reaches half coverage the single best-covered cell is set.
/// Fully empty pixel masks rasterize to nothing.
std::optional<PatchMask> rasterize_mask(const Mask& pixel_mask, int patch);

/// Arithmetic mean of the feature vectors at the set cells: [h,w,D] -> [1,D].
Tensor mask_pool(const Tensor& features, const PatchMask& mask);

enum class ProjectorVariant { mlp, attention, linear, avgpool, lstm };

std::string variant_name(ProjectorVariant v);
ProjectorVariant variant_from_name(const std::string& name);
const std::vector<ProjectorVariant>& all_variants();

/// Temporal fusion of per-frame pooled features into one object token.
/// All variants end with the same projection MLP into the decoder space:
///   mlp:       per-frame 2-layer MLP -> temporal mean -> projection
///   attention: encoder block over the k vectors -> temporal mean -> projection
///   linear:    per-frame linear map -> temporal mean -> projection
///   avgpool:   temporal mean of the raw vectors -> projection
///   lstm:      2-layer LSTM, last hidden state -> projection
struct ProjectorParams {
  ProjectorVariant variant = ProjectorVariant::mlp;
  int input_dim = 0;   // D
  int hidden_dim = 0;  // d_h
  int output_dim = 0;  // d
  bool pool_before_transform = false;  // ablation: temporal mean first (mlp variant)

  Mlp frame_mlp;            // mlp
  Linear frame_linear;      // linear
  TransformerBlock encoder; // attention, width D
  LstmParams lstm;          // lstm, hidden d_h
  Mlp projection;           // all variants

  static ProjectorParams init(ProjectorVariant variant, int input_dim, int hidden_dim,
                              int output_dim, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
  std::size_t param_count() const;
};

/// pooled [k x D] -> token [1 x d]; differentiable through the graph.
TensorPtr encode_object(Graph& g, TensorPtr pooled, const ProjectorParams& p);

struct ObjectToken {
  int id = 0;
  TensorPtr vector;     // [1 x d]
  int frame_count = 0;  // k
  long total_area = 0;  // summed pixel-mask area
  int first_frame = 0;
};

/// Mask pooling for every track of a mask set, with the token cap applied:
/// when more than `cap` objects survive, the largest by total mask area are
/// kept. Output order: first appearance, then larger area, then lower id.
struct PooledObject {
  int id = 0;
  int first_frame = 0;
  int frame_count = 0;
  long total_area = 0;
  Tensor pooled;  // [k x D]
};

std::vector<PooledObject> pool_object_features(const MaskSet& ms, const FeatureMap& fm, int cap,
                                               std::vector<std::string>* warnings = nullptr);

std::vector<ObjectToken> encode_all(Graph& g, const MaskSet& ms, const FeatureMap& fm,
                                    const ProjectorParams& params, int cap = 64,
                                    std::vector<std::string>* warnings = nullptr);

}  // namespace ovtok
