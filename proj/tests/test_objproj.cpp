#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ovtok/gradcheck.hpp"
#include "ovtok/objproj.hpp"
#include "ovtok/vidproj.hpp"
#include "test_util.hpp"

using namespace ovtok;
using testutil::random_tensor;

namespace {

ProjectorParams tiny_projector(ProjectorVariant v, std::uint64_t seed = 7) {
  Rng rng(seed);
  return ProjectorParams::init(v, 6, 8, 5, rng);
}

TensorPtr encode_rows(const Tensor& pooled, const ProjectorParams& p) {
  Graph g;
  return encode_object(g, g.leaf(pooled), p);
}

}  // namespace

TEST_SUITE("objproj.rasterize") {
  TEST_CASE("full-frame mask sets every cell") {
    Mask m(16, 16);
    std::fill(m.data.begin(), m.data.end(), 1);
    auto pm = rasterize_mask(m, 8);
    REQUIRE(pm.has_value());
    CHECK(pm->count() == 4);
  }

  TEST_CASE("exactly half coverage reaches the threshold") {
    Mask m(8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) m.at(y, x) = y < 5 ? 1 : 0;  // 40 of 64 pixels
    auto pm = rasterize_mask(m, 8);
    REQUIRE(pm.has_value());
    CHECK(pm->count() == 1);
    CHECK(pm->at(0, 0) == 1);
  }

  TEST_CASE("tiny object falls back to its best cell") {
    Mask m(16, 16);
    m.at(10, 10) = m.at(10, 11) = m.at(11, 10) = 1;  // 3 pixels in cell (1,1)
    auto pm = rasterize_mask(m, 8);
    REQUIRE(pm.has_value());
    CHECK(pm->count() == 1);
    CHECK(pm->at(1, 1) == 1);
  }

  TEST_CASE("empty pixel mask rasterizes to nothing") {
    CHECK(!rasterize_mask(Mask(16, 16), 8).has_value());
  }
}

TEST_SUITE("objproj.mask_pool") {
  TEST_CASE("single cell picks that feature") {
    Tensor features({2, 2, 1}, {1, 2, 3, 5});
    PatchMask pm;
    pm.h = pm.w = 2;
    pm.cells = {1, 0, 0, 0};
    CHECK(mask_pool(features, pm).data[0] == 1.0);
  }

  TEST_CASE("two cells average") {
    Tensor features({2, 2, 1}, {1, 2, 3, 5});
    PatchMask pm;
    pm.h = pm.w = 2;
    pm.cells = {1, 0, 0, 1};
    CHECK(mask_pool(features, pm).data[0] == 3.0);
  }

  TEST_CASE("empty mask throws") {
    Tensor features({2, 2, 1}, {1, 2, 3, 5});
    PatchMask pm;
    pm.h = pm.w = 2;
    pm.cells = {0, 0, 0, 0};
    CHECK_THROWS_AS(mask_pool(features, pm), EmptyMaskError);
  }

  TEST_CASE("matches the per-cell loop oracle on random grids") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      auto features = random_tensor({8, 8, 32}, rng, -2, 2);
      PatchMask pm;
      pm.h = pm.w = 8;
      pm.cells.assign(64, 0);
      int n = 0;
      for (auto& c : pm.cells) {
        c = rng.uniform() < 0.4 ? 1 : 0;
        n += c;
      }
      if (n == 0) {
        pm.cells[static_cast<std::size_t>(rng.index(64))] = 1;
        n = 1;
      }
      auto pooled = mask_pool(*features, pm);
      for (int c = 0; c < 32; ++c) {
        double ref = 0.0;
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            if (pm.at(y, x)) ref += features->data[(static_cast<std::size_t>(y) * 8 + x) * 32 + c];
        ref /= n;
        CHECK(std::abs(pooled.data[static_cast<std::size_t>(c)] - ref) < 1e-12);
      }
    }
  }

  TEST_CASE("linearity in the features for a fixed mask") {
    Rng rng(5);
    auto X = random_tensor({4, 4, 8}, rng, -1, 1);
    auto Y = random_tensor({4, 4, 8}, rng, -1, 1);
    PatchMask pm;
    pm.h = pm.w = 4;
    pm.cells.assign(16, 0);
    pm.cells[1] = pm.cells[5] = pm.cells[14] = 1;
    const double alpha = 1.7, beta = -0.4;
    Tensor combo({4, 4, 8});
    for (std::size_t i = 0; i < combo.size(); ++i)
      combo.data[i] = alpha * X->data[i] + beta * Y->data[i];
    auto lhs = mask_pool(combo, pm);
    auto px = mask_pool(*X, pm), py = mask_pool(*Y, pm);
    for (int c = 0; c < 8; ++c)
      CHECK(std::abs(lhs.data[static_cast<std::size_t>(c)] -
                     (alpha * px.data[static_cast<std::size_t>(c)] + beta * py.data[static_cast<std::size_t>(c)])) < 1e-10);
  }

  TEST_CASE("full-grid mask equals the global mean") {
    Rng rng(6);
    auto X = random_tensor({4, 4, 3}, rng, -1, 1);
    PatchMask pm;
    pm.h = pm.w = 4;
    pm.cells.assign(16, 1);
    auto pooled = mask_pool(*X, pm);
    for (int c = 0; c < 3; ++c) {
      double ref = 0.0;
      for (int i = 0; i < 16; ++i) ref += X->data[static_cast<std::size_t>(i) * 3 + c];
      CHECK(std::abs(pooled.data[static_cast<std::size_t>(c)] - ref / 16.0) < 1e-12);
    }
  }
}

TEST_SUITE("objproj.encode") {
  TEST_CASE("constant sequences reduce to the single-frame token") {
    Rng rng(11);
    auto row = random_tensor({1, 6}, rng, -1, 1);
    Tensor twice({2, 6});
    std::copy(row->data.begin(), row->data.end(), twice.data.begin());
    std::copy(row->data.begin(), row->data.end(), twice.data.begin() + 6);
    for (auto v : {ProjectorVariant::mlp, ProjectorVariant::attention, ProjectorVariant::linear,
                   ProjectorVariant::avgpool}) {
      auto p = tiny_projector(v);
      auto one = encode_rows(*row, p);
      auto two = encode_rows(twice, p);
      for (int c = 0; c < 5; ++c)
        CHECK(one->data[static_cast<std::size_t>(c)] ==
              doctest::Approx(two->data[static_cast<std::size_t>(c)]).epsilon(1e-10));
    }
  }

  TEST_CASE("near-identity projection exposes the per-frame transform") {
    // fc1 = I with a large positive bias, fc2 = I with the opposite bias:
    // GELU is exactly linear that far from the origin, so the projection
    // stage becomes the identity and the token equals the frame transform.
    Rng rng(13);
    auto p = ProjectorParams::init(ProjectorVariant::mlp, 6, 6, 6, rng);
    const double shift = 20.0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        p.projection.fc1.weight->at2(i, j) = i == j ? 1.0 : 0.0;
        p.projection.fc2.weight->at2(i, j) = i == j ? 1.0 : 0.0;
      }
    for (int j = 0; j < 6; ++j) {
      p.projection.fc1.bias->data[static_cast<std::size_t>(j)] = shift;
      p.projection.fc2.bias->data[static_cast<std::size_t>(j)] = -shift;
    }
    auto row = random_tensor({1, 6}, rng, -0.5, 0.5);
    Tensor constant({3, 6});
    for (int t = 0; t < 3; ++t)
      std::copy(row->data.begin(), row->data.end(), constant.data.begin() + static_cast<std::ptrdiff_t>(t) * 6);

    auto token = encode_rows(constant, p);
    Graph g;
    auto direct = p.frame_mlp.forward(g, g.leaf(*row));
    for (int c = 0; c < 6; ++c)
      CHECK(token->data[static_cast<std::size_t>(c)] ==
            doctest::Approx(direct->data[static_cast<std::size_t>(c)]).epsilon(1e-9));
  }

  TEST_CASE("every variant outputs d dims and passes gradient checks") {
    Rng rng(17);
    for (auto v : all_variants()) {
      auto p = tiny_projector(v, 23 + static_cast<std::uint64_t>(v));
      auto pooled = random_tensor({3, 6}, rng, -1, 1, true);
      auto mix = random_tensor({1, 5}, rng);
      {
        Graph g;
        auto token = encode_object(g, pooled, p);
        CHECK(token->dims == std::vector<int>{1, 5});
      }
      auto f = [&](Graph& g) {
        auto token = encode_object(g, pooled, p);
        return g.sum_all(g.mul(token, g.leaf(mix)));
      };
      NamedParams named;
      p.collect("proj", named);
      auto params = values_of(named);
      params.push_back(pooled);
      CHECK(grad_check(f, params) <= 1e-4);
    }
  }

  TEST_CASE("temporal permutation invariance for mean-pooled variants, order sensitivity for lstm") {
    Rng rng(19);
    auto pooled = random_tensor({5, 6}, rng, -1, 1);
    Tensor permuted({5, 6});
    const int perm[5] = {3, 0, 4, 1, 2};
    for (int t = 0; t < 5; ++t)
      std::copy(pooled->data.begin() + perm[t] * 6, pooled->data.begin() + perm[t] * 6 + 6,
                permuted.data.begin() + static_cast<std::ptrdiff_t>(t) * 6);

    for (auto v : {ProjectorVariant::mlp, ProjectorVariant::linear, ProjectorVariant::avgpool}) {
      auto p = tiny_projector(v);
      auto a = encode_rows(*pooled, p);
      auto b = encode_rows(permuted, p);
      for (int c = 0; c < 5; ++c)
        CHECK(std::abs(a->data[static_cast<std::size_t>(c)] - b->data[static_cast<std::size_t>(c)]) < 1e-10);
    }
    {
      auto p = tiny_projector(ProjectorVariant::lstm);
      auto a = encode_rows(*pooled, p);
      auto b = encode_rows(permuted, p);
      double max_diff = 0.0;
      for (int c = 0; c < 5; ++c)
        max_diff = std::max(max_diff, std::abs(a->data[static_cast<std::size_t>(c)] - b->data[static_cast<std::size_t>(c)]));
      CHECK(max_diff > 1e-6);
    }
  }

  TEST_CASE("deterministic given params and inputs") {
    Rng rng(29);
    auto pooled = random_tensor({4, 6}, rng, -1, 1);
    auto p = tiny_projector(ProjectorVariant::mlp);
    auto a = encode_rows(*pooled, p);
    auto b = encode_rows(*pooled, p);
    CHECK(a->data == b->data);
  }

  TEST_CASE("parameter count is reported") {
    auto p = tiny_projector(ProjectorVariant::linear);
    // frame_linear 6*8+8 plus projection (6->8->5... projection_in=8): 8*8+8 + 8*5+5
    CHECK(p.param_count() == (6 * 8 + 8) + (8 * 8 + 8) + (8 * 5 + 5));
  }
}

TEST_SUITE("objproj.encode_all") {
  namespace {
  MaskSet synthetic_maskset(int objects, int frames, int height, int width, int base_size) {
    MaskSet ms;
    ms.video_id = "synthetic";
    ms.t_o = frames;
    const int per_row = width / 8;
    for (int j = 0; j < objects; ++j) {
      ObjectTrack track;
      track.id = j;
      const int cx = (j % per_row) * 8, cy = (j / per_row) * 8;
      for (int f = 0; f < frames; ++f) {
        Mask m(height, width);
        const int sz = 1 + (j + base_size) % 4;
        for (int y = 0; y < sz && cy + y < height; ++y)
          for (int x = 0; x < sz && cx + x < width; ++x) m.at(cy + y, cx + x) = 1;
        track.entries.push_back({f, std::move(m)});
      }
      ms.tracks.push_back(std::move(track));
    }
    return ms;
  }
  }  // namespace

  TEST_CASE("two-object scene yields two tokens in appearance order") {
    SceneSampler sampler;
    sampler.min_objects = 2;
    sampler.max_objects = 2;
    auto truth = generate_scene(sampler.sample(33));
    OracleDetector det(truth.masks);
    OracleSegmenter seg(truth.masks);
    auto lex = Lexicon::from_lines({"circle", "square", "triangle", "red", "green", "blue",
                                    "yellow", "purple", "orange"});
    PipelineConfig pcfg;
    auto ms = run_pipeline({"v", &truth.frames, truth.tags}, det, seg, lex, pcfg);
    REQUIRE(ms.object_count() == 2);

    FeaturizerConfig fcfg;
    auto fm = featurize_video(truth.frames, sample_context_frames(truth.spec.frames, 8), fcfg, "v");
    Graph g;
    Rng rng(1);
    auto params = ProjectorParams::init(ProjectorVariant::mlp, fcfg.dim, 16, 16, rng);
    auto tokens = encode_all(g, ms, fm, params);
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0].first_frame <= tokens[1].first_frame);
    CHECK(tokens[0].vector->dims == std::vector<int>{1, 16});
  }

  TEST_CASE("cap of 64 keeps the largest objects by area") {
    auto ms = synthetic_maskset(70, 2, 64, 64, 1);
    FeaturizerConfig fcfg;
    Image blank(64, 64);
    auto fm = featurize_video({blank, blank}, {0, 1}, fcfg, "v");
    Graph g;
    Rng rng(2);
    auto params = ProjectorParams::init(ProjectorVariant::avgpool, fcfg.dim, 8, 8, rng);
    std::vector<std::string> warnings;
    auto tokens = encode_all(g, ms, fm, params, 64, &warnings);
    REQUIRE(tokens.size() == 64);

    long min_kept = std::numeric_limits<long>::max();
    std::set<int> kept_ids;
    for (const auto& t : tokens) {
      min_kept = std::min(min_kept, t.total_area);
      kept_ids.insert(t.id);
    }
    for (int j = 0; j < 70; ++j) {
      if (kept_ids.count(j)) continue;
      long area = 0;
      for (const auto& e : ms.tracks[static_cast<std::size_t>(j)].entries) area += e.mask.area();
      CHECK(area <= min_kept);
    }
  }

  TEST_CASE("empty mask set yields no tokens") {
    MaskSet ms;
    ms.video_id = "empty";
    ms.t_o = 4;
    FeaturizerConfig fcfg;
    Image blank(64, 64);
    auto fm = featurize_video({blank}, {0}, fcfg, "v");
    Graph g;
    Rng rng(3);
    auto params = ProjectorParams::init(ProjectorVariant::mlp, fcfg.dim, 8, 8, rng);
    CHECK(encode_all(g, ms, fm, params).empty());
  }
}
