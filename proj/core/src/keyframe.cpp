#include "ovtok/keyframe.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace ovtok {

namespace {

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

int overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  int n = 0;
  for (const auto& w : a) n += b.count(w) > 0;
  return n;
}

}  // namespace

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("Lexicon: cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return from_lines(lines);
}

Lexicon Lexicon::from_lines(const std::vector<std::string>& lines) {
  Lexicon lex;
  for (const auto& raw_line : lines) {
    std::string line = raw_line;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto colon = line.find(':');
    std::string head = to_lower(colon == std::string::npos ? line : line.substr(0, colon));
    // trim
    head.erase(0, head.find_first_not_of(" \t\r"));
    head.erase(head.find_last_not_of(" \t\r") + 1);
    if (head.empty()) continue;

    std::set<std::string> group = {head};
    if (colon != std::string::npos) {
      std::istringstream rest(line.substr(colon + 1));
      std::string word;
      while (rest >> word) group.insert(to_lower(word));
    }
    for (const auto& w : group) {
      lex.concrete_.insert(w);
      auto& syns = lex.synonyms_[w];
      for (const auto& other : group)
        if (other != w) syns.insert(other);
    }
  }
  return lex;
}

const std::set<std::string>& Lexicon::synonyms(const std::string& word) const {
  static const std::set<std::string> empty;
  const auto it = synonyms_.find(word);
  return it == synonyms_.end() ? empty : it->second;
}

std::set<std::string> Lexicon::filter(const std::set<std::string>& raw) const {
  std::set<std::string> out;
  for (const auto& word : raw) {
    const std::string w = to_lower(word);
    if (!concrete(w)) continue;
    out.insert(w);
    const auto& syns = synonyms(w);
    out.insert(syns.begin(), syns.end());
  }
  return out;
}

TagStream build_tag_stream(const std::vector<int>& frame_indices,
                           const std::vector<std::set<std::string>>& raw_tags,
                           const Lexicon& lexicon) {
  if (frame_indices.size() != raw_tags.size())
    throw std::invalid_argument("build_tag_stream: index/tag length mismatch");
  if (!std::is_sorted(frame_indices.begin(), frame_indices.end()))
    throw std::invalid_argument("build_tag_stream: frame indices must ascend");
  TagStream stream;
  stream.frame_indices = frame_indices;
  stream.raw = raw_tags;
  stream.filtered.reserve(raw_tags.size());
  for (const auto& tags : raw_tags) stream.filtered.push_back(lexicon.filter(tags));
  return stream;
}

std::vector<int> select_key_frames(const TagStream& stream, const KeyframeConfig& cfg) {
  if (stream.size() == 0) throw std::invalid_argument("select_key_frames: empty stream");
  std::vector<int> keys;
  const std::set<std::string>* last_key_tags = nullptr;
  for (std::size_t u = 0; u < stream.size(); ++u) {
    const auto& tags = stream.filtered[u];
    if (static_cast<int>(tags.size()) <= cfg.theta_a) continue;  // not in F1
    if (last_key_tags == nullptr || overlap(tags, *last_key_tags) < cfg.theta_b) {
      keys.push_back(stream.frame_indices[u]);
      last_key_tags = &stream.filtered[u];
    }
  }
  if (keys.empty()) throw NoKeyFramesError();
  return keys;
}

std::vector<std::vector<int>> split_clips(const std::vector<int>& sampled_frames,
                                          const std::vector<int>& key_frames) {
  if (key_frames.empty()) throw std::invalid_argument("split_clips: no key frames");
  if (!std::is_sorted(key_frames.begin(), key_frames.end()))
    throw std::invalid_argument("split_clips: key frames must ascend");
  std::vector<std::vector<int>> clips(key_frames.size());
  for (std::size_t c = 0; c < key_frames.size(); ++c) clips[c].push_back(key_frames[c]);

  for (int frame : sampled_frames) {
    // Clip owning this frame: last key <= frame, or the first clip for
    // samples preceding every key frame.
    std::size_t c = 0;
    for (std::size_t k = key_frames.size(); k-- > 0;) {
      if (key_frames[k] <= frame) {
        c = k;
        break;
      }
    }
    if (frame != key_frames[c]) clips[c].push_back(frame);
  }
  for (auto& clip : clips) std::sort(clip.begin(), clip.end());
  return clips;
}

}  // namespace ovtok
