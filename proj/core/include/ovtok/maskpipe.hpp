#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ovtok/keyframe.hpp"
#include "ovtok/mask.hpp"
#include "ovtok/scene.hpp"

namespace ovtok {

struct BoxProposal {
  int frame = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open pixel box
  double score = 1.0;
};

/// Region-proposal stage. Implementations: ground-truth oracle for synthetic
/// scenes, and a file importer for boxes produced by an external model.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<BoxProposal> detect(const Image& frame, int frame_idx) = 0;
};

/// Box-to-mask stage.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<Mask> segment(const Image& frame, int frame_idx,
                                    const std::vector<BoxProposal>& boxes) = 0;
};

/// Returns one tight box per object visible in the frame, score 1.0,
/// ordered by ground-truth object id.
class OracleDetector : public Detector {
 public:
  explicit OracleDetector(const std::vector<std::vector<Mask>>& gt_masks) : gt_(&gt_masks) {}
  std::vector<BoxProposal> detect(const Image& frame, int frame_idx) override;

 private:
  const std::vector<std::vector<Mask>>* gt_;
};

/// For each box returns the ground-truth mask with maximum IoU against the
/// box rectangle; an empty mask when nothing overlaps.
class OracleSegmenter : public Segmenter {
 public:
  explicit OracleSegmenter(const std::vector<std::vector<Mask>>& gt_masks) : gt_(&gt_masks) {}
  std::vector<Mask> segment(const Image& frame, int frame_idx,
                            const std::vector<BoxProposal>& boxes) override;

 private:
  const std::vector<std::vector<Mask>>* gt_;
};

/// Boxes from a JSON file: {"frames": {"<idx>": [[x0,y0,x1,y1,score], ...]}}.
class FileDetector : public Detector {
 public:
  explicit FileDetector(const std::filesystem::path& path);
  std::vector<BoxProposal> detect(const Image& frame, int frame_idx) override;

 private:
  std::map<int, std::vector<BoxProposal>> boxes_;
};

struct TrackEntry {
  int frame = 0;
  Mask mask;
};

struct ObjectTrack {
  int id = 0;
  std::vector<TrackEntry> entries;  // frame indices strictly increasing

  const TrackEntry& first() const { return entries.front(); }
  const TrackEntry& last() const { return entries.back(); }
};

struct MaskSet {
  std::string video_id;
  int t_o = 0;  // sampled frame count actually used
  std::vector<ObjectTrack> tracks;
  std::vector<std::string> warnings;

  int object_count() const { return static_cast<int>(tracks.size()); }
};

struct PipelineConfig {
  KeyframeConfig keyframe;
  double tau_track = 0.3;  // a candidate below this IoU ends the track
  double tau_merge = 0.5;  // cross-clip identity merge threshold
  int t_o_short = 64;
  int t_o_long = 128;
  double fps = 8.0;
  double long_video_seconds = 60.0;
};

/// Duration rule: videos longer than the threshold use the large constant.
int choose_t_o(int frames, const PipelineConfig& cfg);

/// Greedy IoU tracking through one clip, seeded at the key frame. For every
/// later clip frame, detect+segment candidates are matched to live tracks by
/// descending IoU with the track's last mask (ties: lower candidate index);
/// an unmatched track ends. Frames before the key frame are not tracked.
std::vector<ObjectTrack> track_clip(const std::vector<Image>& video,
                                    const std::vector<int>& clip_frames, int key_frame,
                                    const std::vector<Mask>& seed_masks, Detector& det,
                                    Segmenter& seg, double tau_track);

/// Cross-clip identity merging. A track seeded at clip c+1's key frame joins
/// a clip-c track when the old track survived to the clip boundary and the
/// IoU of its final mask with the new seed reaches tau_merge. Ids are stable
/// and ordered by first appearance.
std::vector<ObjectTrack> merge_objects(const std::vector<std::vector<ObjectTrack>>& per_clip,
                                       double tau_merge);

struct VideoInput {
  std::string id;
  const std::vector<Image>* frames = nullptr;
  std::vector<std::set<std::string>> raw_tags;  // per original frame
};

/// Full pipeline: key-frame selection, clip splitting over t_o uniformly
/// sampled frames, per-clip tracking, cross-clip merging. Single-frame
/// inputs skip the tracker entirely.
MaskSet run_pipeline(const VideoInput& video, Detector& det, Segmenter& seg,
                     const Lexicon& lexicon, const PipelineConfig& cfg);

/// MaskSet text container: header "video_id t_o N_oi", then one RLE line per
/// track entry. Mask extents come from the surrounding dataset.
void write_maskset(const std::filesystem::path& path, const MaskSet& ms);
MaskSet read_maskset(const std::filesystem::path& path, int height, int width);

}  // namespace ovtok
