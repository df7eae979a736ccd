#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ovtok {

/// Binary pixel mask over an H x W frame, row-major, one byte per pixel.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  int area() const {
    int n = 0;
    for (std::uint8_t v : data) n += v != 0;
    return n;
  }
  bool empty_mask() const { return area() == 0; }

  bool operator==(const Mask& other) const = default;
};

double mask_iou(const Mask& a, const Mask& b);
bool masks_intersect(const Mask& a, const Mask& b);

/// Tight bounding box of the set pixels: half-open [x0,x1) x [y0,y1).
/// Returns false when the mask is empty.
bool mask_bbox(const Mask& m, int& x0, int& y0, int& x1, int& y1);

/// Alternating run lengths over the row-major pixels, starting with the
/// count of leading zeros. An all-zero mask encodes as the single run H*W.
std::vector<int> rle_encode(const Mask& m);
Mask rle_decode(const std::vector<int>& runs, int height, int width);

/// One mask per text line: "obj_id frame_idx run0 run1 ...".
std::string rle_line(int object_id, int frame_idx, const Mask& m);
struct RleRecord {
  int object_id = 0;
  int frame_idx = 0;
  std::vector<int> runs;
};
RleRecord parse_rle_line(const std::string& line);

}  // namespace ovtok
