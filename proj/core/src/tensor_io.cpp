#include "ovtok/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ovtok {

namespace {

constexpr char kMagic[4] = {'O', 'R', 'T', 'N'};

void put_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

static_assert(std::endian::native == std::endian::little,
              "ORTN writer assumes a little-endian host");

struct Header {
  OrtnType type;
  std::vector<int> dims;
  std::size_t count;
};

void write_header(std::ostream& os, OrtnType type, const std::vector<int>& dims) {
  os.write(kMagic, 4);
  const std::uint8_t code = static_cast<std::uint8_t>(type);
  const std::uint8_t ndim = static_cast<std::uint8_t>(dims.size());
  os.write(reinterpret_cast<const char*>(&code), 1);
  os.write(reinterpret_cast<const char*>(&ndim), 1);
  for (int d : dims) put_u32le(os, static_cast<std::uint32_t>(d));
}

Header read_header(std::istream& is, const std::filesystem::path& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("ORTN: bad magic in " + path.string());
  std::uint8_t code = 0, ndim = 0;
  is.read(reinterpret_cast<char*>(&code), 1);
  is.read(reinterpret_cast<char*>(&ndim), 1);
  if (code > 2) throw std::runtime_error("ORTN: unknown dtype code in " + path.string());
  Header h;
  h.type = static_cast<OrtnType>(code);
  h.count = 1;
  for (int i = 0; i < ndim; ++i) {
    const std::uint32_t d = get_u32le(is);
    if (d == 0) throw std::runtime_error("ORTN: zero extent in " + path.string());
    h.dims.push_back(static_cast<int>(d));
    h.count *= d;
  }
  if (!is) throw std::runtime_error("ORTN: truncated header in " + path.string());
  return h;
}

}  // namespace

void write_ortn(const std::filesystem::path& path, const Tensor& t, OrtnType type) {
  if (type == OrtnType::u8) throw std::invalid_argument("write_ortn: use write_ortn_u8 for u8");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("ORTN: cannot open " + path.string() + " for writing");
  write_header(os, type, t.dims);
  if (type == OrtnType::f64) {
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  } else {
    std::vector<float> f(t.data.begin(), t.data.end());
    os.write(reinterpret_cast<const char*>(f.data()),
             static_cast<std::streamsize>(f.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("ORTN: write failed for " + path.string());
}

Tensor read_ortn(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("ORTN: cannot open " + path.string());
  const Header h = read_header(is, path);
  if (h.type == OrtnType::u8)
    throw std::runtime_error("ORTN: u8 payload, use read_ortn_u8: " + path.string());
  Tensor t(h.dims);
  if (h.type == OrtnType::f64) {
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(h.count * sizeof(double)));
  } else {
    std::vector<float> f(h.count);
    is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(h.count * sizeof(float)));
    for (std::size_t i = 0; i < h.count; ++i) t.data[i] = static_cast<double>(f[i]);
  }
  if (!is) throw std::runtime_error("ORTN: truncated payload in " + path.string());
  return t;
}

void write_ortn_u8(const std::filesystem::path& path, const std::vector<int>& dims,
                   const std::vector<std::uint8_t>& data) {
  if (Tensor::checked_size(dims) != data.size())
    throw std::invalid_argument("write_ortn_u8: dims do not match payload");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("ORTN: cannot open " + path.string() + " for writing");
  write_header(os, OrtnType::u8, dims);
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!os) throw std::runtime_error("ORTN: write failed for " + path.string());
}

std::pair<std::vector<int>, std::vector<std::uint8_t>> read_ortn_u8(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("ORTN: cannot open " + path.string());
  const Header h = read_header(is, path);
  if (h.type != OrtnType::u8)
    throw std::runtime_error("ORTN: expected u8 payload in " + path.string());
  std::vector<std::uint8_t> data(h.count);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(h.count));
  if (!is) throw std::runtime_error("ORTN: truncated payload in " + path.string());
  return {h.dims, std::move(data)};
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("file_checksum: cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

}  // namespace ovtok
