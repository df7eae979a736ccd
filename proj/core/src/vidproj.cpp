#include "ovtok/vidproj.hpp"

namespace ovtok {

StcLiteParams StcLiteParams::init(int input_dim, int hidden_dim, int output_dim, Rng& rng) {
  StcLiteParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.output_dim = output_dim;
  p.mlp = Mlp::init(input_dim, hidden_dim, output_dim, rng);
  return p;
}

void StcLiteParams::collect(const std::string& prefix, NamedParams& out) const {
  mlp.collect(prefix + ".mlp", out);
}

Tensor stc_pool(const FeatureMap& fm) {
  if (fm.t % 2 != 0 || fm.h % 2 != 0 || fm.w % 2 != 0)
    throw std::invalid_argument("stc_pool: t, h, w must all be even");
  const int t2 = fm.t / 2, h2 = fm.h / 2, w2 = fm.w / 2, D = fm.dim;
  Tensor out({t2 * h2 * w2, D});
  std::size_t row = 0;
  for (int ti = 0; ti < t2; ++ti) {
    for (int yi = 0; yi < h2; ++yi) {
      for (int xi = 0; xi < w2; ++xi) {
        double* dst = &out.data[row * D];
        for (int dt = 0; dt < 2; ++dt)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const double* src = fm.at(2 * ti + dt, 2 * yi + dy, 2 * xi + dx);
              for (int c = 0; c < D; ++c) dst[c] += src[c];
            }
        for (int c = 0; c < D; ++c) dst[c] /= 8.0;
        ++row;
      }
    }
  }
  return out;
}

ContextTokens stc_lite(Graph& g, const FeatureMap& fm, const StcLiteParams& p) {
  if (fm.dim != p.input_dim) throw std::invalid_argument("stc_lite: feature width mismatch");
  ContextTokens out;
  out.t = fm.t / 2;
  out.h = fm.h / 2;
  out.w = fm.w / 2;
  out.tokens = p.mlp.forward(g, g.leaf(stc_pool(fm)));
  return out;
}

std::vector<int> sample_context_frames(int total_frames, int t_v) {
  return uniform_indices(total_frames, t_v);
}

}  // namespace ovtok
