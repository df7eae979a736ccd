#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ovtok/mask.hpp"
#include "ovtok/tensor.hpp"

namespace ovtok {

/// u8 RGB frame, row-major H x W x 3.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t* pixel(int y, int x) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int y, int x) const {
    return &data[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  bool operator==(const Image& other) const = default;
};

enum class ShapeKind { circle, square, triangle };

std::string shape_name(ShapeKind kind);
ShapeKind shape_from_name(const std::string& name);

struct ObjectSpec {
  ShapeKind shape = ShapeKind::circle;
  std::string color;              // lowercase color word, e.g. "red"
  std::array<std::uint8_t, 3> rgb{255, 255, 255};
  double size = 8.0;              // circle/triangle radius or square half-side, px
  double x = 32.0, y = 32.0;      // center at the entry frame
  double vx = 0.0, vy = 0.0;      // px per frame
  int entry = 0;
  int exit = 0;                   // half-open [entry, exit); 0 means "until the end"
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int frames = 16;
  int height = 64;
  int width = 64;
  std::array<std::uint8_t, 3> background{16, 16, 16};
  double noise_tag_rate = 0.0;   // per-frame probability of injected noise tags
  bool require_disjoint = false; // verify that no two masks ever overlap
  std::vector<ObjectSpec> objects;
};

struct QAItem {
  enum class Kind { general, object_detail, referring };
  Kind kind = Kind::general;
  std::string question;
  int object_id = -1;  // referring items only
  std::string answer;
};

std::string qa_kind_name(QAItem::Kind kind);
QAItem::Kind qa_kind_from_name(const std::string& name);

struct SceneTruth {
  SceneSpec spec;
  std::vector<Image> frames;
  std::vector<std::vector<Mask>> masks;          // [object][frame]
  std::vector<std::set<std::string>> tags;       // per frame, lowercase
  std::string caption;
  std::vector<QAItem> qa;

  bool visible(int object, int frame) const { return !masks[static_cast<std::size_t>(object)][static_cast<std::size_t>(frame)].empty_mask(); }
  int object_count() const { return static_cast<int>(masks.size()); }
};

/// Abstract-noun lexicon used for injected noise tags; disjoint from every
/// concrete word the scenes can emit.
const std::vector<std::string>& noise_lexicon();

/// Renders the scene and derives ground-truth masks, tags and a caption.
/// Deterministic given spec.seed. Throws on specs whose objects do not fit
/// the frame at their entry position, and on overlap when require_disjoint.
SceneTruth generate_scene(const SceneSpec& spec);

/// Motion phrase for an object: "moving right", "staying still", ...
std::string motion_phrase(const ObjectSpec& o);
/// One of: left, right, up, down, still.
std::string motion_direction(const ObjectSpec& o);

/// Derives a QA item of the requested kind from ground truth. Deterministic
/// given seed. Referring items on empty scenes throw.
QAItem make_qa(const SceneTruth& scene, QAItem::Kind kind, std::uint64_t seed);

enum class ReferringTemplate { color, shape, direction, doing };
QAItem make_referring_qa(const SceneTruth& scene, int object_id, ReferringTemplate tmpl);

/// Vertical-rank descriptor of an object: top/bottom, with middle or
/// second/third between, by starting y position.
std::string lane_name(const SceneTruth& scene, int object_id);

/// Object-detail question that names an object by its lane:
/// "what color is the object in the top lane ?"
QAItem make_lane_color_qa(const SceneTruth& scene, int object_id);

/// Scene-spec sampler for datasets. Objects are laid out in horizontal
/// lanes, so disjoint=true yields pairwise-disjoint trajectories by
/// construction. `palette_size` limits the color choices (smaller palettes
/// give balanced answer sets for QA training).
struct SceneSampler {
  int frames = 16;
  int height = 64, width = 64;
  int min_objects = 2, max_objects = 4;
  int palette_size = 4;
  bool disjoint = true;
  bool distinct_colors = true;
  double noise_tag_rate = 0.3;
  bool allow_entry_exit = false;

  SceneSpec sample(std::uint64_t seed) const;
};

struct SceneFiles {
  std::string id;
  std::filesystem::path dir;
  std::uint64_t frames_checksum = 0;
  std::uint64_t masks_checksum = 0;
  std::uint64_t tags_checksum = 0;
  std::uint64_t meta_checksum = 0;
};

struct DatasetManifest {
  std::vector<SceneFiles> scenes;
  int frames = 0, height = 0, width = 0;
};

/// Writes frames/masks/tags/meta per scene plus manifest.json; returns the
/// manifest. Layout: <out>/scenes/<id>/{frames.ortn,masks.rle,tags.txt,meta.json}.
DatasetManifest export_dataset(const std::vector<SceneSpec>& specs,
                               const std::filesystem::path& out_dir);

DatasetManifest load_manifest(const std::filesystem::path& dataset_dir);

struct LoadedScene {
  std::string id;
  SceneSpec spec;  // reconstructed object metadata (geometry fields only)
  std::vector<Image> frames;
  std::vector<std::vector<Mask>> masks;
  std::vector<std::set<std::string>> tags;
  std::string caption;
  std::vector<QAItem> qa;
};

/// Reads one scene back; verifies stored checksums and throws on mismatch.
LoadedScene load_scene(const std::filesystem::path& dataset_dir, const SceneFiles& entry);

/// QA items are derived at export time; stored in meta.json.
std::vector<QAItem> standard_qa(const SceneTruth& scene, std::uint64_t seed);

}  // namespace ovtok
