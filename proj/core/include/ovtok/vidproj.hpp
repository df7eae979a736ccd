#pragma once

#include "ovtok/featurize.hpp"
#include "ovtok/nn.hpp"

namespace ovtok {

struct ContextTokens {
  TensorPtr tokens;  // [N_v x d]
  int t = 0, h = 0, w = 0;  // t', h', w' with N_v = t'*h'*w'

  int count() const { return t * h * w; }
};

/// Spatiotemporal connector stand-in: 2x2x2 average pooling over the feature
/// map followed by a per-token 2-layer MLP into the decoder space.
struct StcLiteParams {
  int input_dim = 0, hidden_dim = 0, output_dim = 0;
  Mlp mlp;

  static StcLiteParams init(int input_dim, int hidden_dim, int output_dim, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

/// Block means of the 2x2x2 pooling stage: [t,h,w,D] -> [(t/2*h/2*w/2) x D].
/// Throws on odd extents.
Tensor stc_pool(const FeatureMap& fm);

ContextTokens stc_lite(Graph& g, const FeatureMap& fm, const StcLiteParams& p);

/// Frame indices for the video-centric branch: uniform with endpoints,
/// repeating the last frame when the video is shorter than t_v.
std::vector<int> sample_context_frames(int total_frames, int t_v);

}  // namespace ovtok
