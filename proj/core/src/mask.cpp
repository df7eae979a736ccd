#include "ovtok/mask.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace ovtok {

double mask_iou(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("mask_iou: size mismatch");
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool va = a.data[i] != 0, vb = b.data[i] != 0;
    inter += va && vb;
    uni += va || vb;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

bool masks_intersect(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("masks_intersect: size mismatch");
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] && b.data[i]) return true;
  return false;
}

bool mask_bbox(const Mask& m, int& x0, int& y0, int& x1, int& y1) {
  x0 = m.width;
  y0 = m.height;
  x1 = 0;
  y1 = 0;
  bool any = false;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      any = true;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
  }
  return any;
}

std::vector<int> rle_encode(const Mask& m) {
  std::vector<int> runs;
  std::uint8_t current = 0;
  int run = 0;
  for (std::uint8_t v : m.data) {
    const std::uint8_t bit = v != 0;
    if (bit == current) {
      ++run;
    } else {
      runs.push_back(run);
      current = bit;
      run = 1;
    }
  }
  runs.push_back(run);
  return runs;
}

Mask rle_decode(const std::vector<int>& runs, int height, int width) {
  Mask m(height, width);
  std::size_t pos = 0;
  std::uint8_t bit = 0;
  for (int run : runs) {
    if (run < 0 || pos + static_cast<std::size_t>(run) > m.data.size())
      throw std::runtime_error("rle_decode: runs exceed mask size");
    if (bit) std::fill_n(m.data.begin() + static_cast<std::ptrdiff_t>(pos), run, std::uint8_t{1});
    pos += static_cast<std::size_t>(run);
    bit ^= 1;
  }
  if (pos != m.data.size()) throw std::runtime_error("rle_decode: runs do not cover mask");
  return m;
}

std::string rle_line(int object_id, int frame_idx, const Mask& m) {
  std::ostringstream os;
  os << object_id << " " << frame_idx;
  for (int run : rle_encode(m)) os << " " << run;
  return os.str();
}

RleRecord parse_rle_line(const std::string& line) {
  std::istringstream is(line);
  RleRecord rec;
  if (!(is >> rec.object_id >> rec.frame_idx))
    throw std::runtime_error("parse_rle_line: malformed line: " + line);
  int run = 0;
  while (is >> run) rec.runs.push_back(run);
  if (rec.runs.empty()) throw std::runtime_error("parse_rle_line: no runs: " + line);
  return rec;
}

}  // namespace ovtok
