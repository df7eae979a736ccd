#include "ovtok/scene.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ovtok/tensor_io.hpp"

namespace ovtok {

namespace {

using nlohmann::json;

struct PaletteEntry {
  const char* name;
  std::array<std::uint8_t, 3> rgb;
};

constexpr PaletteEntry kPalette[] = {
    {"red", {220, 40, 40}},    {"green", {40, 200, 60}},  {"blue", {50, 90, 230}},
    {"yellow", {235, 220, 50}}, {"purple", {150, 60, 200}}, {"orange", {240, 140, 30}},
};

constexpr const char* kNumberWords[] = {"zero", "one", "two",   "three", "four",
                                        "five", "six", "seven", "eight"};

int effective_exit(const ObjectSpec& o, int frames) { return o.exit == 0 ? frames : o.exit; }

bool point_in_shape(const ObjectSpec& o, double cx, double cy, double px, double py) {
  const double dx = px - cx, dy = py - cy;
  switch (o.shape) {
    case ShapeKind::circle:
      return dx * dx + dy * dy <= o.size * o.size;
    case ShapeKind::square:
      return std::abs(dx) <= o.size && std::abs(dy) <= o.size;
    case ShapeKind::triangle: {
      // Up-pointing isoceles triangle: apex (cx, cy-r), base corners (cx+-r, cy+r).
      const double r = o.size;
      auto cross = [](double ax, double ay, double bx, double by) { return ax * by - ay * bx; };
      const double d1 = cross(-r - 0.0, r - (-r), dx - 0.0, dy - (-r));   // apex -> left
      const double d2 = cross(r - (-r), r - r, dx - (-r), dy - r);        // left -> right
      const double d3 = cross(0.0 - r, -r - r, dx - r, dy - r);           // right -> apex
      const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
      const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
      return !(neg && pos);
    }
  }
  return false;
}

Mask render_object_mask(const ObjectSpec& o, int frame, int height, int width) {
  Mask m(height, width);
  const double cx = o.x + o.vx * (frame - o.entry);
  const double cy = o.y + o.vy * (frame - o.entry);
  const int x_lo = std::max(0, static_cast<int>(std::floor(cx - o.size - 2)));
  const int x_hi = std::min(width - 1, static_cast<int>(std::ceil(cx + o.size + 2)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(cy - o.size - 2)));
  const int y_hi = std::min(height - 1, static_cast<int>(std::ceil(cy + o.size + 2)));
  for (int y = y_lo; y <= y_hi; ++y)
    for (int x = x_lo; x <= x_hi; ++x)
      if (point_in_shape(o, cx, cy, x + 0.5, y + 0.5)) m.at(y, x) = 1;
  return m;
}

std::string caption_verb(const ObjectSpec& o) {
  const std::string dir = motion_direction(o);
  if (dir == "still") return "stays still";
  return "moves " + dir;
}

}  // namespace

std::string shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::circle: return "circle";
    case ShapeKind::square: return "square";
    case ShapeKind::triangle: return "triangle";
  }
  return "circle";
}

ShapeKind shape_from_name(const std::string& name) {
  if (name == "circle") return ShapeKind::circle;
  if (name == "square") return ShapeKind::square;
  if (name == "triangle") return ShapeKind::triangle;
  throw std::invalid_argument("unknown shape: " + name);
}

std::string qa_kind_name(QAItem::Kind kind) {
  switch (kind) {
    case QAItem::Kind::general: return "general";
    case QAItem::Kind::object_detail: return "object_detail";
    case QAItem::Kind::referring: return "referring";
  }
  return "general";
}

QAItem::Kind qa_kind_from_name(const std::string& name) {
  if (name == "general") return QAItem::Kind::general;
  if (name == "object_detail") return QAItem::Kind::object_detail;
  if (name == "referring") return QAItem::Kind::referring;
  throw std::invalid_argument("unknown qa kind: " + name);
}

const std::vector<std::string>& noise_lexicon() {
  static const std::vector<std::string> words = {
      "happiness", "freedom", "justice", "history", "energy",
      "silence",   "wisdom",  "future",  "memory",  "courage",
  };
  return words;
}

std::string motion_direction(const ObjectSpec& o) {
  if (std::abs(o.vx) < 0.25 && std::abs(o.vy) < 0.25) return "still";
  if (std::abs(o.vx) >= std::abs(o.vy)) return o.vx > 0 ? "right" : "left";
  return o.vy > 0 ? "down" : "up";
}

std::string motion_phrase(const ObjectSpec& o) {
  const std::string dir = motion_direction(o);
  if (dir == "still") return "staying still";
  return "moving " + dir;
}

SceneTruth generate_scene(const SceneSpec& spec) {
  if (spec.frames < 1) throw std::invalid_argument("generate_scene: frames < 1");
  if (spec.height < 1 || spec.width < 1) throw std::invalid_argument("generate_scene: empty frame");
  for (const auto& o : spec.objects) {
    const int exit = effective_exit(o, spec.frames);
    if (o.entry < 0 || o.entry >= exit || exit > spec.frames)
      throw std::invalid_argument("generate_scene: entry/exit out of range");
    if (o.size <= 0) throw std::invalid_argument("generate_scene: nonpositive size");
    if (o.x - o.size < 0 || o.x + o.size > spec.width || o.y - o.size < 0 ||
        o.y + o.size > spec.height)
      throw std::invalid_argument("generate_scene: object does not fit the frame at entry");
  }

  SceneTruth truth;
  truth.spec = spec;
  const int n = static_cast<int>(spec.objects.size());
  truth.masks.assign(static_cast<std::size_t>(n), {});
  for (auto& per_frame : truth.masks) per_frame.assign(static_cast<std::size_t>(spec.frames), Mask());

  truth.frames.reserve(static_cast<std::size_t>(spec.frames));
  for (int t = 0; t < spec.frames; ++t) {
    Image img(spec.height, spec.width);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        auto* p = img.pixel(y, x);
        p[0] = spec.background[0];
        p[1] = spec.background[1];
        p[2] = spec.background[2];
      }
    for (int j = 0; j < n; ++j) {
      const auto& o = spec.objects[static_cast<std::size_t>(j)];
      const int exit = effective_exit(o, spec.frames);
      Mask m(spec.height, spec.width);
      if (t >= o.entry && t < exit) m = render_object_mask(o, t, spec.height, spec.width);
      if (spec.require_disjoint && !m.empty_mask()) {
        for (int i = 0; i < j; ++i) {
          if (masks_intersect(truth.masks[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)], m))
            throw std::invalid_argument("generate_scene: overlapping trajectories with require_disjoint");
        }
      }
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
          if (m.at(y, x)) {
            auto* p = img.pixel(y, x);
            p[0] = o.rgb[0];
            p[1] = o.rgb[1];
            p[2] = o.rgb[2];
          }
      truth.masks[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)] = std::move(m);
    }
    truth.frames.push_back(std::move(img));
  }

  Rng rng(spec.seed);
  truth.tags.assign(static_cast<std::size_t>(spec.frames), {});
  for (int t = 0; t < spec.frames; ++t) {
    auto& tagset = truth.tags[static_cast<std::size_t>(t)];
    for (int j = 0; j < n; ++j) {
      if (!truth.visible(j, t)) continue;
      tagset.insert(shape_name(spec.objects[static_cast<std::size_t>(j)].shape));
      tagset.insert(spec.objects[static_cast<std::size_t>(j)].color);
    }
    if (rng.uniform() < spec.noise_tag_rate) {
      const auto& noise = noise_lexicon();
      tagset.insert(noise[static_cast<std::size_t>(rng.index(noise.size()))]);
    }
  }

  std::ostringstream cap;
  for (int j = 0; j < n; ++j) {
    const auto& o = spec.objects[static_cast<std::size_t>(j)];
    if (j) cap << " while ";
    cap << "a " << o.color << " " << shape_name(o.shape) << " " << caption_verb(o);
  }
  if (n == 0) cap << "an empty scene";
  truth.caption = cap.str();
  return truth;
}

QAItem make_referring_qa(const SceneTruth& scene, int object_id, ReferringTemplate tmpl) {
  if (object_id < 0 || object_id >= scene.object_count())
    throw std::invalid_argument("make_referring_qa: bad object id");
  const auto& o = scene.spec.objects[static_cast<std::size_t>(object_id)];
  QAItem item;
  item.kind = QAItem::Kind::referring;
  item.object_id = object_id;
  switch (tmpl) {
    case ReferringTemplate::color:
      item.question = "what color is <o> ?";
      item.answer = o.color;
      break;
    case ReferringTemplate::shape:
      item.question = "what shape is <o> ?";
      item.answer = shape_name(o.shape);
      break;
    case ReferringTemplate::direction:
      item.question = "which direction does <o> move ?";
      item.answer = motion_direction(o);
      break;
    case ReferringTemplate::doing:
      item.question = "what is <o> doing in this video ?";
      item.answer = motion_phrase(o);
      break;
  }
  return item;
}

std::string lane_name(const SceneTruth& scene, int object_id) {
  const int n = scene.object_count();
  if (object_id < 0 || object_id >= n) throw std::invalid_argument("lane_name: bad object id");
  int rank = 0;
  for (int j = 0; j < n; ++j) {
    const auto& a = scene.spec.objects[static_cast<std::size_t>(j)];
    const auto& b = scene.spec.objects[static_cast<std::size_t>(object_id)];
    if (a.y < b.y || (a.y == b.y && j < object_id)) ++rank;
  }
  if (n == 1) return "only";
  if (rank == 0) return "top";
  if (rank == n - 1) return "bottom";
  if (n == 3) return "middle";
  return rank == 1 ? "second" : "third";
}

QAItem make_lane_color_qa(const SceneTruth& scene, int object_id) {
  QAItem item;
  item.kind = QAItem::Kind::object_detail;
  item.object_id = object_id;
  item.question = "what color is the object in the " + lane_name(scene, object_id) + " lane ?";
  item.answer = scene.spec.objects[static_cast<std::size_t>(object_id)].color;
  return item;
}

QAItem make_qa(const SceneTruth& scene, QAItem::Kind kind, std::uint64_t seed) {
  Rng rng(seed);
  const int n = scene.object_count();
  switch (kind) {
    case QAItem::Kind::general: {
      QAItem item;
      item.kind = kind;
      item.question = "how many objects appear in this video ?";
      item.answer = kNumberWords[std::min<std::size_t>(static_cast<std::size_t>(n), 8)];
      return item;
    }
    case QAItem::Kind::object_detail: {
      if (n == 0) throw std::invalid_argument("make_qa: object_detail on empty scene");
      // Ask about a shape that appears exactly once so the reference is unambiguous.
      std::vector<int> unique_ids;
      for (int j = 0; j < n; ++j) {
        int same = 0;
        for (int i = 0; i < n; ++i)
          same += scene.spec.objects[static_cast<std::size_t>(i)].shape ==
                  scene.spec.objects[static_cast<std::size_t>(j)].shape;
        if (same == 1) unique_ids.push_back(j);
      }
      QAItem item;
      item.kind = kind;
      if (unique_ids.empty()) {
        item.question = "how many objects appear in this video ?";
        item.answer = kNumberWords[std::min<std::size_t>(static_cast<std::size_t>(n), 8)];
        return item;
      }
      const int j = unique_ids[static_cast<std::size_t>(rng.index(unique_ids.size()))];
      const auto& o = scene.spec.objects[static_cast<std::size_t>(j)];
      item.question = "what color is the " + shape_name(o.shape) + " ?";
      item.answer = o.color;
      return item;
    }
    case QAItem::Kind::referring: {
      if (n == 0) throw std::invalid_argument("make_qa: referring on empty scene");
      const int j = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
      const auto tmpl = static_cast<ReferringTemplate>(rng.index(4));
      return make_referring_qa(scene, j, tmpl);
    }
  }
  throw std::invalid_argument("make_qa: unknown kind");
}

std::vector<QAItem> standard_qa(const SceneTruth& scene, std::uint64_t seed) {
  std::vector<QAItem> items;
  items.push_back(make_qa(scene, QAItem::Kind::general, seed));
  if (scene.object_count() > 0) {
    items.push_back(make_qa(scene, QAItem::Kind::object_detail, seed + 1));
    for (int j = 0; j < scene.object_count(); ++j) {
      items.push_back(make_referring_qa(scene, j, ReferringTemplate::color));
      items.push_back(make_referring_qa(scene, j, ReferringTemplate::shape));
      items.push_back(make_referring_qa(scene, j, ReferringTemplate::doing));
    }
  }
  return items;
}

SceneSpec SceneSampler::sample(std::uint64_t seed) const {
  if (max_objects > palette_size && distinct_colors)
    throw std::invalid_argument("SceneSampler: palette too small for distinct colors");
  Rng rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  spec.frames = frames;
  spec.height = height;
  spec.width = width;
  spec.noise_tag_rate = noise_tag_rate;
  spec.require_disjoint = disjoint;

  const int n = min_objects + static_cast<int>(rng.index(static_cast<std::uint64_t>(max_objects - min_objects + 1)));
  std::vector<int> colors(static_cast<std::size_t>(palette_size));
  for (int i = 0; i < palette_size; ++i) colors[static_cast<std::size_t>(i)] = i;
  rng.shuffle(colors);

  const int lane_h = height / n;
  for (int j = 0; j < n; ++j) {
    ObjectSpec o;
    o.shape = static_cast<ShapeKind>(rng.index(3));
    const int color_idx = distinct_colors ? colors[static_cast<std::size_t>(j)]
                                          : static_cast<int>(rng.index(static_cast<std::uint64_t>(palette_size)));
    o.color = kPalette[color_idx].name;
    o.rgb = kPalette[color_idx].rgb;
    const double max_size = std::min(10.0, lane_h / 2.0 - 2.0);
    const double min_size = std::min(4.0, max_size);
    o.size = min_size + rng.uniform() * (max_size - min_size);
    o.y = lane_h * j + lane_h / 2.0;
    o.x = o.size + 2.0 + rng.uniform() * (width - 2.0 * (o.size + 2.0));
    // Horizontal speed bounded so the object never leaves the frame and the
    // per-frame displacement stays small relative to the object size
    // (consecutive-frame masks must overlap well for IoU tracking).
    const double span = frames > 1 ? frames - 1 : 1;
    const double v_lo = -(o.x - o.size - 1.0) / span;
    const double v_hi = (width - 1.0 - o.x - o.size) / span;
    const double v_cap = std::min(3.0, o.size / 3.0);
    double vx = rng.uniform(std::max(v_lo, -v_cap), std::min(v_hi, v_cap));
    if (rng.uniform() < 0.25) vx = 0.0;  // some objects stay still
    o.vx = vx;
    o.vy = 0.0;
    if (allow_entry_exit && rng.uniform() < 0.4) {
      o.entry = static_cast<int>(rng.index(static_cast<std::uint64_t>(frames / 2)));
      o.exit = frames - static_cast<int>(rng.index(static_cast<std::uint64_t>(frames / 4 + 1)));
    }
    spec.objects.push_back(o);
  }
  return spec;
}

namespace {

json meta_to_json(const std::string& id, const SceneTruth& truth) {
  const auto& spec = truth.spec;
  json objects = json::array();
  for (std::size_t j = 0; j < spec.objects.size(); ++j) {
    const auto& o = spec.objects[j];
    objects.push_back({
        {"id", j},
        {"shape", shape_name(o.shape)},
        {"color", o.color},
        {"rgb", {o.rgb[0], o.rgb[1], o.rgb[2]}},
        {"size", o.size},
        {"x", o.x},
        {"y", o.y},
        {"vx", o.vx},
        {"vy", o.vy},
        {"entry", o.entry},
        {"exit", o.exit == 0 ? spec.frames : o.exit},
    });
  }
  json qa = json::array();
  for (const auto& item : truth.qa) {
    qa.push_back({
        {"kind", qa_kind_name(item.kind)},
        {"question", item.question},
        {"object_id", item.object_id},
        {"answer", item.answer},
    });
  }
  return json{
      {"id", id},
      {"seed", spec.seed},
      {"frames", spec.frames},
      {"height", spec.height},
      {"width", spec.width},
      {"background", {spec.background[0], spec.background[1], spec.background[2]}},
      {"noise_tag_rate", spec.noise_tag_rate},
      {"caption", truth.caption},
      {"objects", objects},
      {"qa", qa},
  };
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

DatasetManifest export_dataset(const std::vector<SceneSpec>& specs,
                               const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "scenes");
  DatasetManifest manifest;
  json scenes_json = json::array();
  for (std::size_t idx = 0; idx < specs.size(); ++idx) {
    SceneTruth truth = generate_scene(specs[idx]);
    truth.qa = standard_qa(truth, specs[idx].seed);

    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "scene_%05zu", idx);
    const std::string id = idbuf;
    const auto dir = out_dir / "scenes" / id;
    std::filesystem::create_directories(dir);

    const auto& spec = truth.spec;
    std::vector<std::uint8_t> pixels;
    pixels.reserve(truth.frames.size() * truth.frames[0].data.size());
    for (const auto& frame : truth.frames)
      pixels.insert(pixels.end(), frame.data.begin(), frame.data.end());
    write_ortn_u8(dir / "frames.ortn", {spec.frames, spec.height, spec.width, 3}, pixels);

    std::ostringstream rle;
    for (std::size_t j = 0; j < truth.masks.size(); ++j)
      for (int t = 0; t < spec.frames; ++t)
        if (!truth.masks[j][static_cast<std::size_t>(t)].empty_mask())
          rle << rle_line(static_cast<int>(j), t, truth.masks[j][static_cast<std::size_t>(t)]) << "\n";
    write_text_file(dir / "masks.rle", rle.str());

    std::ostringstream tags;
    for (const auto& tagset : truth.tags) {
      bool first = true;
      for (const auto& tag : tagset) {
        if (!first) tags << " ";
        tags << tag;
        first = false;
      }
      tags << "\n";
    }
    write_text_file(dir / "tags.txt", tags.str());

    write_text_file(dir / "meta.json", meta_to_json(id, truth).dump(2) + "\n");

    SceneFiles files;
    files.id = id;
    files.dir = std::filesystem::path("scenes") / id;
    files.frames_checksum = file_checksum(dir / "frames.ortn");
    files.masks_checksum = file_checksum(dir / "masks.rle");
    files.tags_checksum = file_checksum(dir / "tags.txt");
    files.meta_checksum = file_checksum(dir / "meta.json");
    manifest.scenes.push_back(files);
    manifest.frames = spec.frames;
    manifest.height = spec.height;
    manifest.width = spec.width;

    scenes_json.push_back({
        {"id", id},
        {"path", files.dir.generic_string()},
        {"frames", spec.frames},
        {"height", spec.height},
        {"width", spec.width},
        {"checksum_frames", files.frames_checksum},
        {"checksum_masks", files.masks_checksum},
        {"checksum_tags", files.tags_checksum},
        {"checksum_meta", files.meta_checksum},
    });
  }
  write_text_file(out_dir / "manifest.json", json{{"scenes", scenes_json}}.dump(2) + "\n");
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& dataset_dir) {
  const json root = json::parse(read_text_file(dataset_dir / "manifest.json"));
  DatasetManifest manifest;
  for (const auto& s : root.at("scenes")) {
    SceneFiles files;
    files.id = s.at("id").get<std::string>();
    files.dir = s.at("path").get<std::string>();
    files.frames_checksum = s.at("checksum_frames").get<std::uint64_t>();
    files.masks_checksum = s.at("checksum_masks").get<std::uint64_t>();
    files.tags_checksum = s.at("checksum_tags").get<std::uint64_t>();
    files.meta_checksum = s.at("checksum_meta").get<std::uint64_t>();
    manifest.scenes.push_back(files);
    manifest.frames = s.at("frames").get<int>();
    manifest.height = s.at("height").get<int>();
    manifest.width = s.at("width").get<int>();
  }
  return manifest;
}

LoadedScene load_scene(const std::filesystem::path& dataset_dir, const SceneFiles& entry) {
  const auto dir = dataset_dir / entry.dir;
  if (file_checksum(dir / "frames.ortn") != entry.frames_checksum ||
      file_checksum(dir / "masks.rle") != entry.masks_checksum ||
      file_checksum(dir / "tags.txt") != entry.tags_checksum ||
      file_checksum(dir / "meta.json") != entry.meta_checksum)
    throw std::runtime_error("load_scene: checksum mismatch in " + dir.string());

  LoadedScene scene;
  scene.id = entry.id;

  const json meta = json::parse(read_text_file(dir / "meta.json"));
  scene.spec.seed = meta.at("seed").get<std::uint64_t>();
  scene.spec.frames = meta.at("frames").get<int>();
  scene.spec.height = meta.at("height").get<int>();
  scene.spec.width = meta.at("width").get<int>();
  scene.spec.noise_tag_rate = meta.at("noise_tag_rate").get<double>();
  scene.caption = meta.at("caption").get<std::string>();
  for (const auto& o : meta.at("objects")) {
    ObjectSpec obj;
    obj.shape = shape_from_name(o.at("shape").get<std::string>());
    obj.color = o.at("color").get<std::string>();
    obj.rgb = {o.at("rgb")[0].get<std::uint8_t>(), o.at("rgb")[1].get<std::uint8_t>(),
               o.at("rgb")[2].get<std::uint8_t>()};
    obj.size = o.at("size").get<double>();
    obj.x = o.at("x").get<double>();
    obj.y = o.at("y").get<double>();
    obj.vx = o.at("vx").get<double>();
    obj.vy = o.at("vy").get<double>();
    obj.entry = o.at("entry").get<int>();
    obj.exit = o.at("exit").get<int>();
    scene.spec.objects.push_back(obj);
  }
  for (const auto& q : meta.at("qa")) {
    QAItem item;
    item.kind = qa_kind_from_name(q.at("kind").get<std::string>());
    item.question = q.at("question").get<std::string>();
    item.object_id = q.at("object_id").get<int>();
    item.answer = q.at("answer").get<std::string>();
    scene.qa.push_back(item);
  }

  auto [dims, pixels] = read_ortn_u8(dir / "frames.ortn");
  if (dims.size() != 4 || dims[0] != scene.spec.frames || dims[3] != 3)
    throw std::runtime_error("load_scene: unexpected frame tensor shape");
  const int T = dims[0], H = dims[1], W = dims[2];
  scene.frames.assign(static_cast<std::size_t>(T), Image(H, W));
  const std::size_t frame_bytes = static_cast<std::size_t>(H) * W * 3;
  for (int t = 0; t < T; ++t)
    std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>(t * frame_bytes), frame_bytes,
                scene.frames[static_cast<std::size_t>(t)].data.begin());

  scene.masks.assign(scene.spec.objects.size(),
                     std::vector<Mask>(static_cast<std::size_t>(T), Mask(H, W)));
  std::istringstream rle(read_text_file(dir / "masks.rle"));
  std::string line;
  while (std::getline(rle, line)) {
    if (line.empty()) continue;
    const RleRecord rec = parse_rle_line(line);
    if (rec.object_id < 0 || rec.object_id >= static_cast<int>(scene.masks.size()) ||
        rec.frame_idx < 0 || rec.frame_idx >= T)
      throw std::runtime_error("load_scene: rle record out of range");
    scene.masks[static_cast<std::size_t>(rec.object_id)][static_cast<std::size_t>(rec.frame_idx)] =
        rle_decode(rec.runs, H, W);
  }

  std::istringstream tags(read_text_file(dir / "tags.txt"));
  while (std::getline(tags, line)) {
    std::set<std::string> tagset;
    std::istringstream ls(line);
    std::string word;
    while (ls >> word) tagset.insert(word);
    scene.tags.push_back(std::move(tagset));
  }
  if (static_cast<int>(scene.tags.size()) != T)
    throw std::runtime_error("load_scene: tag line count does not match frames");
  return scene;
}

}  // namespace ovtok
