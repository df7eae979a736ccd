#include "ovtok/objproj.hpp"

#include <algorithm>

namespace ovtok {

std::optional<PatchMask> rasterize_mask(const Mask& pixel_mask, int patch) {
  if (patch < 1 || pixel_mask.height % patch != 0 || pixel_mask.width % patch != 0)
    throw std::invalid_argument("rasterize_mask: patch must divide mask extents");
  const int gh = pixel_mask.height / patch, gw = pixel_mask.width / patch;
  PatchMask pm;
  pm.h = gh;
  pm.w = gw;
  pm.cells.assign(static_cast<std::size_t>(gh) * gw, 0);

  int best_cell = -1, best_cover = 0;
  bool any = false;
  const int half = patch * patch;  // threshold: 2*cover >= patch^2
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      int cover = 0;
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x) cover += pixel_mask.at(cy * patch + y, cx * patch + x) != 0;
      if (cover > best_cover) {
        best_cover = cover;
        best_cell = cy * gw + cx;
      }
      if (2 * cover >= half && cover > 0) {
        pm.cells[static_cast<std::size_t>(cy) * gw + cx] = 1;
        any = true;
      }
    }
  }
  if (!any) {
    if (best_cover == 0) return std::nullopt;  // fully empty pixel mask
    pm.cells[static_cast<std::size_t>(best_cell)] = 1;  // keep tiny objects representable
  }
  return pm;
}

Tensor mask_pool(const Tensor& features, const PatchMask& mask) {
  if (features.rank() != 3) throw std::invalid_argument("mask_pool: features must be [h,w,D]");
  const int h = features.dims[0], w = features.dims[1], D = features.dims[2];
  if (h != mask.h || w != mask.w) throw std::invalid_argument("mask_pool: grid mismatch");
  const int n = mask.count();
  if (n == 0) throw EmptyMaskError();
  Tensor out({1, D});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      const double* f = &features.data[(static_cast<std::size_t>(y) * w + x) * D];
      for (int c = 0; c < D; ++c) out.data[static_cast<std::size_t>(c)] += f[c];
    }
  for (int c = 0; c < D; ++c) out.data[static_cast<std::size_t>(c)] /= n;
  return out;
}

std::string variant_name(ProjectorVariant v) {
  switch (v) {
    case ProjectorVariant::mlp: return "mlp";
    case ProjectorVariant::attention: return "attention";
    case ProjectorVariant::linear: return "linear";
    case ProjectorVariant::avgpool: return "avgpool";
    case ProjectorVariant::lstm: return "lstm";
  }
  return "mlp";
}

ProjectorVariant variant_from_name(const std::string& name) {
  for (auto v : all_variants())
    if (variant_name(v) == name) return v;
  throw std::invalid_argument("unknown projector variant: " + name);
}

const std::vector<ProjectorVariant>& all_variants() {
  static const std::vector<ProjectorVariant> variants = {
      ProjectorVariant::mlp, ProjectorVariant::attention, ProjectorVariant::linear,
      ProjectorVariant::avgpool, ProjectorVariant::lstm};
  return variants;
}

ProjectorParams ProjectorParams::init(ProjectorVariant variant, int input_dim, int hidden_dim,
                                      int output_dim, Rng& rng) {
  ProjectorParams p;
  p.variant = variant;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.output_dim = output_dim;
  int projection_in = input_dim;
  switch (variant) {
    case ProjectorVariant::mlp:
      p.frame_mlp = Mlp::init(input_dim, hidden_dim, hidden_dim, rng);
      projection_in = hidden_dim;
      break;
    case ProjectorVariant::attention: {
      int heads = 4;
      while (heads > 1 && input_dim % heads != 0) heads /= 2;
      p.encoder = TransformerBlock::init(input_dim, heads, 2 * input_dim, rng);
      projection_in = input_dim;
      break;
    }
    case ProjectorVariant::linear:
      p.frame_linear = Linear::init(input_dim, hidden_dim, rng);
      projection_in = hidden_dim;
      break;
    case ProjectorVariant::avgpool:
      projection_in = input_dim;
      break;
    case ProjectorVariant::lstm:
      p.lstm = LstmParams::init(input_dim, hidden_dim, 2, rng);
      projection_in = hidden_dim;
      break;
  }
  p.projection = Mlp::init(projection_in, hidden_dim, output_dim, rng);
  return p;
}

void ProjectorParams::collect(const std::string& prefix, NamedParams& out) const {
  switch (variant) {
    case ProjectorVariant::mlp: frame_mlp.collect(prefix + ".frame_mlp", out); break;
    case ProjectorVariant::attention: encoder.collect(prefix + ".encoder", out); break;
    case ProjectorVariant::linear: frame_linear.collect(prefix + ".frame_linear", out); break;
    case ProjectorVariant::avgpool: break;
    case ProjectorVariant::lstm: lstm.collect(prefix + ".lstm", out); break;
  }
  projection.collect(prefix + ".projection", out);
}

std::size_t ProjectorParams::param_count() const {
  NamedParams named;
  collect("p", named);
  std::size_t n = 0;
  for (const auto& [name, t] : named) n += t->size();
  return n;
}

TensorPtr encode_object(Graph& g, TensorPtr pooled, const ProjectorParams& p) {
  if (pooled->rank() != 2 || pooled->rows() < 1)
    throw std::invalid_argument("encode_object: pooled must be [k x D] with k >= 1");
  if (pooled->cols() != p.input_dim)
    throw std::invalid_argument("encode_object: feature width does not match projector");
  if (!all_finite(*pooled)) throw std::runtime_error("encode_object: non-finite input");

  TensorPtr fused;
  switch (p.variant) {
    case ProjectorVariant::mlp:
      if (p.pool_before_transform) {
        fused = p.frame_mlp.forward(g, g.mean_rows(pooled));
      } else {
        fused = g.mean_rows(p.frame_mlp.forward(g, pooled));
      }
      break;
    case ProjectorVariant::attention: {
      auto out = p.encoder.forward(g, pooled, /*causal=*/false);
      fused = g.mean_rows(out.x);
      break;
    }
    case ProjectorVariant::linear:
      fused = g.mean_rows(p.frame_linear.forward(g, pooled));
      break;
    case ProjectorVariant::avgpool:
      fused = g.mean_rows(pooled);
      break;
    case ProjectorVariant::lstm: {
      auto hidden = lstm_forward(g, pooled, p.lstm);
      fused = g.slice_rows(hidden, hidden->rows() - 1, hidden->rows());
      break;
    }
  }
  return p.projection.forward(g, fused);
}

std::vector<PooledObject> pool_object_features(const MaskSet& ms, const FeatureMap& fm, int cap,
                                               std::vector<std::string>* warnings) {
  if (fm.h < 1 || fm.w < 1) throw std::invalid_argument("pool_object_features: empty grid");
  std::vector<PooledObject> pooled;
  for (const auto& track : ms.tracks) {
    PooledObject obj;
    obj.id = track.id;
    obj.first_frame = track.first().frame;
    std::vector<double> rows;
    int k = 0;
    for (const auto& entry : track.entries) {
      obj.total_area += entry.mask.area();
      const int patch = entry.mask.height / fm.h;
      if (patch < 1 || entry.mask.height % fm.h != 0 || entry.mask.width % fm.w != 0)
        throw std::invalid_argument("pool_object_features: mask extents do not match grid");
      auto pm = rasterize_mask(entry.mask, patch);
      if (!pm) continue;
      const int slice = fm.nearest_slice(entry.frame);
      Tensor features({fm.h, fm.w, fm.dim},
                      std::vector<double>(fm.at(slice, 0, 0),
                                          fm.at(slice, 0, 0) + static_cast<std::size_t>(fm.h) * fm.w * fm.dim));
      const Tensor row = mask_pool(features, *pm);
      rows.insert(rows.end(), row.data.begin(), row.data.end());
      ++k;
    }
    if (k == 0) {
      if (warnings)
        warnings->push_back("object " + std::to_string(track.id) + " has no usable masks; dropped");
      continue;
    }
    obj.frame_count = k;
    obj.pooled = Tensor({k, fm.dim}, std::move(rows));
    pooled.push_back(std::move(obj));
  }

  if (cap > 0 && static_cast<int>(pooled.size()) > cap) {
    // Evict the smallest objects by total mask area (ties keep lower ids).
    std::vector<std::size_t> order(pooled.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (pooled[a].total_area != pooled[b].total_area)
        return pooled[a].total_area > pooled[b].total_area;
      return pooled[a].id < pooled[b].id;
    });
    order.resize(static_cast<std::size_t>(cap));
    std::vector<PooledObject> kept;
    kept.reserve(order.size());
    for (std::size_t i : order) kept.push_back(std::move(pooled[i]));
    pooled = std::move(kept);
  }

  std::sort(pooled.begin(), pooled.end(), [](const PooledObject& a, const PooledObject& b) {
    if (a.first_frame != b.first_frame) return a.first_frame < b.first_frame;
    if (a.total_area != b.total_area) return a.total_area > b.total_area;
    return a.id < b.id;
  });
  return pooled;
}

std::vector<ObjectToken> encode_all(Graph& g, const MaskSet& ms, const FeatureMap& fm,
                                    const ProjectorParams& params, int cap,
                                    std::vector<std::string>* warnings) {
  auto pooled = pool_object_features(ms, fm, cap, warnings);
  std::vector<ObjectToken> tokens;
  tokens.reserve(pooled.size());
  for (auto& obj : pooled) {
    ObjectToken token;
    token.id = obj.id;
    token.frame_count = obj.frame_count;
    token.total_area = obj.total_area;
    token.first_frame = obj.first_frame;
    token.vector = encode_object(g, g.leaf(std::move(obj.pooled)), params);
    tokens.push_back(std::move(token));
  }
  return tokens;
}

}  // namespace ovtok
