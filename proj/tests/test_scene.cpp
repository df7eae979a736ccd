#include <cmath>
#include <fstream>
#include <map>

#include "doctest.h"
#include "ovtok/scene.hpp"
#include "ovtok/tensor_io.hpp"
#include "test_util.hpp"

using namespace ovtok;

namespace {

SceneSpec one_circle_spec(int frames = 4) {
  SceneSpec spec;
  spec.seed = 1;
  spec.frames = frames;
  ObjectSpec o;
  o.shape = ShapeKind::circle;
  o.color = "red";
  o.rgb = {220, 40, 40};
  o.size = 8;
  o.x = 32;
  o.y = 32;
  spec.objects.push_back(o);
  return spec;
}

}  // namespace

TEST_SUITE("mask.rle") {
  TEST_CASE("round trip on random masks") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
      Mask m(16, 16);
      for (auto& v : m.data) v = rng.uniform() < 0.3 ? 1 : 0;
      auto runs = rle_encode(m);
      CHECK(rle_decode(runs, 16, 16) == m);
    }
  }

  TEST_CASE("all-zero mask is a single run") {
    Mask m(4, 4);
    CHECK(rle_encode(m) == std::vector<int>{16});
  }

  TEST_CASE("line format round trip") {
    Mask m(4, 4);
    m.at(1, 2) = 1;
    auto rec = parse_rle_line(rle_line(7, 3, m));
    CHECK(rec.object_id == 7);
    CHECK(rec.frame_idx == 3);
    CHECK(rle_decode(rec.runs, 4, 4) == m);
  }
}

TEST_SUITE("scenesynth.generate") {
  TEST_CASE("static red circle: identical frames, masks, tags") {
    auto truth = generate_scene(one_circle_spec());
    REQUIRE(truth.frames.size() == 4);
    for (int t = 1; t < 4; ++t) {
      CHECK(truth.frames[static_cast<std::size_t>(t)] == truth.frames[0]);
      CHECK(truth.masks[0][static_cast<std::size_t>(t)] == truth.masks[0][0]);
    }
    for (const auto& tags : truth.tags) {
      CHECK(tags.count("circle") == 1);
      CHECK(tags.count("red") == 1);
    }
    CHECK(truth.caption == "a red circle stays still");
  }

  TEST_CASE("object moving right exits and mask becomes empty") {
    SceneSpec spec = one_circle_spec(10);
    spec.objects[0].x = 40;
    spec.objects[0].vx = 8;
    auto truth = generate_scene(spec);
    bool seen_empty = false;
    for (int t = 0; t < 10; ++t) {
      const auto& m = truth.masks[0][static_cast<std::size_t>(t)];
      const double left = 40 + 8.0 * t - 8.0;
      if (left >= 64.0) {
        CHECK(m.empty_mask());
        seen_empty = true;
      }
      if (m.empty_mask()) CHECK(truth.tags[static_cast<std::size_t>(t)].count("circle") == 0);
    }
    CHECK(seen_empty);
  }

  TEST_CASE("mask pixel count matches area formula within a boundary ring") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
      SceneSpec spec;
      spec.frames = 1;
      ObjectSpec o;
      o.shape = static_cast<ShapeKind>(rng.index(3));
      o.color = "red";
      o.size = 5.0 + rng.uniform() * 10.0;
      o.x = 32;
      o.y = 32;
      spec.objects.push_back(o);
      auto truth = generate_scene(spec);
      const double count = truth.masks[0][0].area();
      double area = 0.0, perimeter = 0.0;
      const double r = o.size;
      switch (o.shape) {
        case ShapeKind::circle:
          area = 3.14159265358979 * r * r;
          perimeter = 2 * 3.14159265358979 * r;
          break;
        case ShapeKind::square:
          area = 4 * r * r;
          perimeter = 8 * r;
          break;
        case ShapeKind::triangle:
          area = 2 * r * r;  // base 2r, height 2r
          perimeter = 2 * r + 2 * r * std::sqrt(5.0);
          break;
      }
      CHECK(std::abs(count - area) <= perimeter + 8);
    }
  }

  TEST_CASE("deterministic given seed") {
    SceneSampler sampler;
    sampler.noise_tag_rate = 0.5;
    auto a = generate_scene(sampler.sample(1234));
    auto b = generate_scene(sampler.sample(1234));
    CHECK(a.frames == b.frames);
    CHECK(a.tags == b.tags);
    for (std::size_t j = 0; j < a.masks.size(); ++j)
      for (std::size_t t = 0; t < a.masks[j].size(); ++t) CHECK(a.masks[j][t] == b.masks[j][t]);
  }

  TEST_CASE("disjoint sampler never overlaps, checked exhaustively") {
    SceneSampler sampler;
    sampler.disjoint = true;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      auto truth = generate_scene(sampler.sample(seed));  // throws on overlap
      const int n = truth.object_count();
      for (int t = 0; t < truth.spec.frames; ++t)
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            CHECK(!masks_intersect(truth.masks[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)],
                                   truth.masks[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)]));
    }
  }

  TEST_CASE("tags never name an invisible object; noise comes from the noise lexicon") {
    SceneSampler sampler;
    sampler.noise_tag_rate = 0.8;
    sampler.allow_entry_exit = true;
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      auto truth = generate_scene(sampler.sample(seed));
      for (int t = 0; t < truth.spec.frames; ++t) {
        std::set<std::string> expected;
        for (int j = 0; j < truth.object_count(); ++j) {
          if (!truth.visible(j, t)) continue;
          expected.insert(shape_name(truth.spec.objects[static_cast<std::size_t>(j)].shape));
          expected.insert(truth.spec.objects[static_cast<std::size_t>(j)].color);
        }
        for (const auto& tag : truth.tags[static_cast<std::size_t>(t)]) {
          if (expected.count(tag)) continue;
          const auto& noise = noise_lexicon();
          CHECK(std::find(noise.begin(), noise.end(), tag) != noise.end());
        }
        // tags of frame t contain the names of all visible objects
        for (const auto& name : expected) CHECK(truth.tags[static_cast<std::size_t>(t)].count(name) == 1);
      }
    }
  }

  TEST_CASE("oversized object throws") {
    SceneSpec spec = one_circle_spec();
    spec.objects[0].size = 40;
    CHECK_THROWS_AS(generate_scene(spec), std::invalid_argument);
  }
}

TEST_SUITE("scenesynth.qa") {
  TEST_CASE("count question on three objects") {
    SceneSampler sampler;
    sampler.min_objects = 3;
    sampler.max_objects = 3;
    auto truth = generate_scene(sampler.sample(5));
    auto item = make_qa(truth, QAItem::Kind::general, 0);
    CHECK(item.answer == "three");
  }

  TEST_CASE("referring color question answers ground truth") {
    SceneSampler sampler;
    auto truth = generate_scene(sampler.sample(6));
    for (int j = 0; j < truth.object_count(); ++j) {
      auto item = make_referring_qa(truth, j, ReferringTemplate::color);
      CHECK(item.question == "what color is <o> ?");
      CHECK(item.answer == truth.spec.objects[static_cast<std::size_t>(j)].color);
      CHECK(item.object_id == j);
    }
  }

  TEST_CASE("direction question matches velocity sign") {
    SceneSpec spec = one_circle_spec(8);
    spec.objects[0].x = 16;
    spec.objects[0].vx = 2;
    auto truth = generate_scene(spec);
    auto item = make_referring_qa(truth, 0, ReferringTemplate::direction);
    CHECK(item.answer == "right");
    spec.objects[0].x = 48;
    spec.objects[0].vx = -2;
    item = make_referring_qa(generate_scene(spec), 0, ReferringTemplate::direction);
    CHECK(item.answer == "left");
  }

  TEST_CASE("referring on empty scene throws") {
    SceneSpec spec;
    spec.frames = 2;
    auto truth = generate_scene(spec);
    CHECK_THROWS_AS(make_qa(truth, QAItem::Kind::referring, 0), std::invalid_argument);
  }

  TEST_CASE("referring answers are not a function of question text across a dataset") {
    SceneSampler sampler;
    std::map<std::string, std::set<std::string>> answers_by_question;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto truth = generate_scene(sampler.sample(seed));
      for (int j = 0; j < truth.object_count(); ++j) {
        auto item = make_referring_qa(truth, j, ReferringTemplate::color);
        answers_by_question[item.question].insert(item.answer);
      }
    }
    bool ambiguous = false;
    for (const auto& [q, answers] : answers_by_question) ambiguous = ambiguous || answers.size() > 1;
    CHECK(ambiguous);
  }
}

TEST_SUITE("scenesynth.export") {
  TEST_CASE("export then reload is bit-identical") {
    testutil::TempDir tmp("export");
    SceneSampler sampler;
    sampler.noise_tag_rate = 0.4;
    std::vector<SceneSpec> specs;
    for (std::uint64_t seed = 0; seed < 3; ++seed) specs.push_back(sampler.sample(seed));
    auto manifest = export_dataset(specs, tmp.path());
    REQUIRE(manifest.scenes.size() == 3);

    for (std::size_t i = 0; i < specs.size(); ++i) {
      auto truth = generate_scene(specs[i]);
      auto loaded = load_scene(tmp.path(), manifest.scenes[i]);
      REQUIRE(loaded.frames.size() == truth.frames.size());
      for (std::size_t t = 0; t < truth.frames.size(); ++t) CHECK(loaded.frames[t] == truth.frames[t]);
      REQUIRE(loaded.masks.size() == truth.masks.size());
      for (std::size_t j = 0; j < truth.masks.size(); ++j)
        for (std::size_t t = 0; t < truth.masks[j].size(); ++t)
          CHECK(loaded.masks[j][t] == truth.masks[j][t]);
      CHECK(loaded.tags == truth.tags);
      CHECK(loaded.caption == truth.caption);
    }
  }

  TEST_CASE("manifest lists one entry per scene and reload validates checksums") {
    testutil::TempDir tmp("checksums");
    SceneSampler sampler;
    std::vector<SceneSpec> specs;
    for (std::uint64_t seed = 0; seed < 100; ++seed) specs.push_back(sampler.sample(seed));
    auto manifest = export_dataset(specs, tmp.path());
    CHECK(manifest.scenes.size() == 100);

    auto reloaded = load_manifest(tmp.path());
    REQUIRE(reloaded.scenes.size() == 100);
    for (const auto& entry : reloaded.scenes) {
      (void)load_scene(tmp.path(), entry);  // throws on checksum mismatch
    }
  }

  TEST_CASE("checksum validation detects corruption") {
    testutil::TempDir tmp("corrupt");
    SceneSampler sampler;
    auto manifest = export_dataset({sampler.sample(0)}, tmp.path());
    auto path = tmp.path() / manifest.scenes[0].dir / "tags.txt";
    std::ofstream(path, std::ios::app) << "tampered\n";
    CHECK_THROWS_AS(load_scene(tmp.path(), manifest.scenes[0]), std::runtime_error);
  }
}
