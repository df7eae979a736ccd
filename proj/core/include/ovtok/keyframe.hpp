#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovtok {

/// Concrete-word lexicon with synonym groups. Loaded from a data file with
/// lines "noun: syn1 syn2 ...". Synonym relations are symmetrized, and every
/// listed word (head or synonym) belongs to the concrete set.
class Lexicon {
 public:
  static Lexicon load(const std::filesystem::path& path);
  static Lexicon from_lines(const std::vector<std::string>& lines);

  bool concrete(const std::string& word) const { return concrete_.count(word) > 0; }
  const std::set<std::string>& concrete_set() const { return concrete_; }
  const std::set<std::string>& synonyms(const std::string& word) const;

  /// (raw intersect concrete) union the synonym groups of the kept words.
  std::set<std::string> filter(const std::set<std::string>& raw) const;

 private:
  std::set<std::string> concrete_;
  std::map<std::string, std::set<std::string>> synonyms_;
};

struct TagStream {
  std::vector<int> frame_indices;                 // sampled frames, ascending
  std::vector<std::set<std::string>> raw;         // per sampled frame
  std::vector<std::set<std::string>> filtered;    // after lexicon filtering

  std::size_t size() const { return frame_indices.size(); }
};

struct KeyframeConfig {
  int theta_a = 3;          // frames need strictly more than theta_a tags
  int theta_b = 2;          // new key when overlap with last key < theta_b
  int tag_sample_count = 16;
};

struct NoKeyFramesError : std::runtime_error {
  NoKeyFramesError() : std::runtime_error("no frame passes the tag-count threshold") {}
};

TagStream build_tag_stream(const std::vector<int>& frame_indices,
                           const std::vector<std::set<std::string>>& raw_tags,
                           const Lexicon& lexicon);

/// Tag-driven key-frame selection. Frames with more than theta_a filtered
/// tags are eligible; the first eligible frame seeds the scan and an
/// eligible frame becomes a new key when its overlap with the previous key's
/// tags drops below theta_b. Throws NoKeyFramesError when nothing is
/// eligible (callers fall back to frame 0).
std::vector<int> select_key_frames(const TagStream& stream, const KeyframeConfig& cfg);

/// Partition of the sampled frames by key frames. Each clip holds its key
/// frame (inserted even when not sampled) plus the sampled frames before
/// the next key. Samples preceding the first key join the first clip.
std::vector<std::vector<int>> split_clips(const std::vector<int>& sampled_frames,
                                          const std::vector<int>& key_frames);

}  // namespace ovtok
