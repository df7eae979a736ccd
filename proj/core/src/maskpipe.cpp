#include "ovtok/maskpipe.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ovtok {

namespace {

Mask box_mask(const BoxProposal& box, int height, int width) {
  Mask m(height, width);
  const int x0 = std::max(0, box.x0), x1 = std::min(width, box.x1);
  const int y0 = std::max(0, box.y0), y1 = std::min(height, box.y1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.at(y, x) = 1;
  return m;
}

struct MatchCandidate {
  double iou;
  int cand_idx;
  int track_idx;
};

}  // namespace

std::vector<BoxProposal> OracleDetector::detect(const Image& frame, int frame_idx) {
  std::vector<BoxProposal> out;
  for (const auto& per_frame : *gt_) {
    if (frame_idx < 0 || frame_idx >= static_cast<int>(per_frame.size()))
      throw std::out_of_range("OracleDetector: frame index out of range");
    const Mask& m = per_frame[static_cast<std::size_t>(frame_idx)];
    int x0, y0, x1, y1;
    if (!mask_bbox(m, x0, y0, x1, y1)) continue;
    BoxProposal box;
    box.frame = frame_idx;
    box.x0 = x0;
    box.y0 = y0;
    box.x1 = x1;
    box.y1 = y1;
    box.score = 1.0;
    out.push_back(box);
  }
  (void)frame;
  return out;
}

std::vector<Mask> OracleSegmenter::segment(const Image& frame, int frame_idx,
                                           const std::vector<BoxProposal>& boxes) {
  std::vector<Mask> out;
  out.reserve(boxes.size());
  for (const auto& box : boxes) {
    if (box.x0 < 0 || box.x0 >= box.x1 || box.x1 > frame.width || box.y0 < 0 ||
        box.y0 >= box.y1 || box.y1 > frame.height)
      throw std::invalid_argument("OracleSegmenter: invalid box");
    const Mask rect = box_mask(box, frame.height, frame.width);
    double best_iou = 0.0;
    const Mask* best = nullptr;
    for (const auto& per_frame : *gt_) {
      const Mask& gt = per_frame[static_cast<std::size_t>(frame_idx)];
      if (gt.empty_mask()) continue;
      const double iou = mask_iou(rect, gt);
      if (iou > best_iou) {
        best_iou = iou;
        best = &gt;
      }
    }
    out.push_back(best ? *best : Mask(frame.height, frame.width));
  }
  return out;
}

FileDetector::FileDetector(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("FileDetector: cannot open " + path.string());
  const auto root = nlohmann::json::parse(is);
  for (const auto& [key, arr] : root.at("frames").items()) {
    const int frame_idx = std::stoi(key);
    for (const auto& b : arr) {
      BoxProposal box;
      box.frame = frame_idx;
      box.x0 = b.at(0).get<int>();
      box.y0 = b.at(1).get<int>();
      box.x1 = b.at(2).get<int>();
      box.y1 = b.at(3).get<int>();
      box.score = b.size() > 4 ? b.at(4).get<double>() : 1.0;
      boxes_[frame_idx].push_back(box);
    }
  }
}

std::vector<BoxProposal> FileDetector::detect(const Image& frame, int frame_idx) {
  (void)frame;
  const auto it = boxes_.find(frame_idx);
  return it == boxes_.end() ? std::vector<BoxProposal>{} : it->second;
}

int choose_t_o(int frames, const PipelineConfig& cfg) {
  const double seconds = cfg.fps > 0 ? frames / cfg.fps : 0.0;
  return seconds > cfg.long_video_seconds ? cfg.t_o_long : cfg.t_o_short;
}

std::vector<ObjectTrack> track_clip(const std::vector<Image>& video,
                                    const std::vector<int>& clip_frames, int key_frame,
                                    const std::vector<Mask>& seed_masks, Detector& det,
                                    Segmenter& seg, double tau_track) {
  std::vector<ObjectTrack> tracks;
  std::vector<bool> alive;
  for (std::size_t i = 0; i < seed_masks.size(); ++i) {
    if (seed_masks[i].empty_mask()) continue;
    ObjectTrack track;
    track.id = static_cast<int>(tracks.size());
    track.entries.push_back({key_frame, seed_masks[i]});
    tracks.push_back(std::move(track));
    alive.push_back(true);
  }
  if (tracks.empty()) return tracks;

  for (int frame_idx : clip_frames) {
    if (frame_idx <= key_frame) continue;  // forward tracking only
    const Image& frame = video[static_cast<std::size_t>(frame_idx)];
    auto candidates = seg.segment(frame, frame_idx, det.detect(frame, frame_idx));
    candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                    [](const Mask& m) { return m.empty_mask(); }),
                     candidates.end());

    std::vector<MatchCandidate> pairs;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (!alive[t]) continue;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double iou = mask_iou(tracks[t].last().mask, candidates[c]);
        if (iou >= tau_track)
          pairs.push_back({iou, static_cast<int>(c), static_cast<int>(t)});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const MatchCandidate& a, const MatchCandidate& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.cand_idx != b.cand_idx) return a.cand_idx < b.cand_idx;
      return a.track_idx < b.track_idx;
    });

    std::vector<bool> cand_used(candidates.size(), false);
    std::vector<bool> track_extended(tracks.size(), false);
    for (const auto& p : pairs) {
      if (cand_used[static_cast<std::size_t>(p.cand_idx)] ||
          track_extended[static_cast<std::size_t>(p.track_idx)])
        continue;
      cand_used[static_cast<std::size_t>(p.cand_idx)] = true;
      track_extended[static_cast<std::size_t>(p.track_idx)] = true;
      tracks[static_cast<std::size_t>(p.track_idx)].entries.push_back(
          {frame_idx, candidates[static_cast<std::size_t>(p.cand_idx)]});
    }
    for (std::size_t t = 0; t < tracks.size(); ++t)
      if (alive[t] && !track_extended[t]) alive[t] = false;  // object left the frame
  }
  return tracks;
}

std::vector<ObjectTrack> merge_objects(const std::vector<std::vector<ObjectTrack>>& per_clip,
                                       double tau_merge) {
  std::vector<ObjectTrack> global;
  for (std::size_t c = 0; c < per_clip.size(); ++c) {
    const auto& clip_tracks = per_clip[c];
    if (c == 0) {
      for (const auto& track : clip_tracks) {
        ObjectTrack t = track;
        t.id = static_cast<int>(global.size());
        global.push_back(std::move(t));
      }
      continue;
    }
    // Boundary frame: the latest frame any previous-clip track reached.
    int boundary = -1;
    for (std::size_t pc = 0; pc < c; ++pc)
      for (const auto& t : per_clip[pc]) boundary = std::max(boundary, t.last().frame);

    struct MergePair {
      double iou;
      int new_idx;
      int old_idx;
    };
    std::vector<MergePair> pairs;
    for (std::size_t n = 0; n < clip_tracks.size(); ++n) {
      const int key_frame = clip_tracks[n].first().frame;
      for (std::size_t o = 0; o < global.size(); ++o) {
        const int last_frame = global[o].last().frame;
        // Only tracks that survived to the clip boundary are merge candidates.
        if (last_frame != boundary && last_frame != key_frame) continue;
        if (last_frame >= key_frame) continue;  // frames must keep increasing
        const double iou = mask_iou(global[o].last().mask, clip_tracks[n].first().mask);
        if (iou >= tau_merge) pairs.push_back({iou, static_cast<int>(n), static_cast<int>(o)});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const MergePair& a, const MergePair& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.new_idx != b.new_idx) return a.new_idx < b.new_idx;
      return a.old_idx < b.old_idx;
    });
    std::vector<bool> new_used(clip_tracks.size(), false);
    std::vector<bool> old_used(global.size(), false);
    for (const auto& p : pairs) {
      if (new_used[static_cast<std::size_t>(p.new_idx)] || old_used[static_cast<std::size_t>(p.old_idx)])
        continue;
      new_used[static_cast<std::size_t>(p.new_idx)] = true;
      old_used[static_cast<std::size_t>(p.old_idx)] = true;
      auto& dst = global[static_cast<std::size_t>(p.old_idx)].entries;
      const auto& src = clip_tracks[static_cast<std::size_t>(p.new_idx)].entries;
      dst.insert(dst.end(), src.begin(), src.end());
    }
    for (std::size_t n = 0; n < clip_tracks.size(); ++n) {
      if (new_used[n]) continue;
      ObjectTrack t = clip_tracks[n];
      t.id = static_cast<int>(global.size());
      global.push_back(std::move(t));
    }
  }
  // Ids by first appearance; merging preserves creation order already, but
  // re-number defensively after sorting by (first frame, id).
  std::stable_sort(global.begin(), global.end(), [](const ObjectTrack& a, const ObjectTrack& b) {
    return a.first().frame < b.first().frame;
  });
  for (std::size_t i = 0; i < global.size(); ++i) global[i].id = static_cast<int>(i);
  return global;
}

MaskSet run_pipeline(const VideoInput& video, Detector& det, Segmenter& seg,
                     const Lexicon& lexicon, const PipelineConfig& cfg) {
  if (video.frames == nullptr || video.frames->empty())
    throw std::invalid_argument("run_pipeline: empty video");
  const auto& frames = *video.frames;
  const int T = static_cast<int>(frames.size());

  MaskSet result;
  result.video_id = video.id;

  if (T == 1) {
    // Images are single-frame videos; the tracker is not used.
    result.t_o = 1;
    auto seeds = seg.segment(frames[0], 0, det.detect(frames[0], 0));
    for (const auto& seed : seeds) {
      if (seed.empty_mask()) {
        result.warnings.push_back("proposal matched no mask on frame 0");
        continue;
      }
      ObjectTrack track;
      track.id = static_cast<int>(result.tracks.size());
      track.entries.push_back({0, seed});
      result.tracks.push_back(std::move(track));
    }
    return result;
  }

  const int tag_count = std::min(cfg.keyframe.tag_sample_count, T);
  const auto tag_frames = uniform_indices(T, tag_count);
  std::vector<std::set<std::string>> raw;
  raw.reserve(tag_frames.size());
  for (int f : tag_frames) {
    if (f < 0 || f >= static_cast<int>(video.raw_tags.size()))
      throw std::invalid_argument("run_pipeline: tags missing for frame");
    raw.push_back(video.raw_tags[static_cast<std::size_t>(f)]);
  }
  const TagStream stream = build_tag_stream(tag_frames, raw, lexicon);

  std::vector<int> keys;
  try {
    keys = select_key_frames(stream, cfg.keyframe);
  } catch (const NoKeyFramesError&) {
    keys = {0};  // fallback: frame 0 becomes the sole key frame
    result.warnings.push_back("no frame passed theta_a; falling back to frame 0");
  }

  const int t_o = std::min(choose_t_o(T, cfg), T);
  result.t_o = t_o;
  const auto samples = uniform_indices(T, t_o);
  const auto clips = split_clips(samples, keys);

  std::vector<std::vector<ObjectTrack>> per_clip;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    const int key_frame = keys[c];
    const Image& key_image = frames[static_cast<std::size_t>(key_frame)];
    auto seeds = seg.segment(key_image, key_frame, det.detect(key_image, key_frame));
    for (const auto& seed : seeds)
      if (seed.empty_mask())
        result.warnings.push_back("proposal matched no mask on key frame " +
                                  std::to_string(key_frame));
    per_clip.push_back(
        track_clip(frames, clips[c], key_frame, seeds, det, seg, cfg.tau_track));
  }
  result.tracks = merge_objects(per_clip, cfg.tau_merge);
  return result;
}

void write_maskset(const std::filesystem::path& path, const MaskSet& ms) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_maskset: cannot open " + path.string());
  os << ms.video_id << " " << ms.t_o << " " << ms.object_count() << "\n";
  for (const auto& track : ms.tracks)
    for (const auto& entry : track.entries) os << rle_line(track.id, entry.frame, entry.mask) << "\n";
  if (!os) throw std::runtime_error("write_maskset: write failed for " + path.string());
}

MaskSet read_maskset(const std::filesystem::path& path, int height, int width) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_maskset: cannot open " + path.string());
  MaskSet ms;
  int n = 0;
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("read_maskset: missing header");
  {
    std::istringstream hs(header);
    if (!(hs >> ms.video_id >> ms.t_o >> n))
      throw std::runtime_error("read_maskset: malformed header");
  }
  std::map<int, ObjectTrack> by_id;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const RleRecord rec = parse_rle_line(line);
    auto& track = by_id[rec.object_id];
    track.id = rec.object_id;
    track.entries.push_back({rec.frame_idx, rle_decode(rec.runs, height, width)});
  }
  for (auto& [id, track] : by_id) {
    std::sort(track.entries.begin(), track.entries.end(),
              [](const TrackEntry& a, const TrackEntry& b) { return a.frame < b.frame; });
    ms.tracks.push_back(std::move(track));
  }
  if (ms.object_count() != n)
    throw std::runtime_error("read_maskset: track count does not match header");
  return ms;
}

}  // namespace ovtok
