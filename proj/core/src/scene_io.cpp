#include "gsocc/scene_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>

#include "gsocc/errors.hpp"

namespace gsocc {

namespace {

constexpr std::string_view kSceneMagic = "SGAU";
constexpr std::string_view kGridMagic = "SVOX";

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve) { out_.reserve(reserve); }

  void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void expect_magic(std::string_view m, const char* what) {
    need(4, "truncated header");
    if (std::memcmp(bytes_.data(), m.data(), 4) != 0) {
      throw FormatError(std::string("bad magic, expected \"") + std::string(m) + "\" for " + what, 0);
    }
    pos_ += 4;
  }
  std::uint8_t u8() {
    need(1, "truncated header");
    return bytes_[pos_++];
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }

  // Payload readers assume the caller checked the length.
  float f32_unchecked() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(v);
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError(std::string(what) + ": need " + std::to_string(n) + " more bytes, have " +
                            std::to_string(remaining()),
                        bytes_.size());
    }
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n), "truncated header");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Checks the payload section is exactly `expected` bytes long.
void check_payload_length(const ByteReader& r, std::uint64_t expected, const char* what) {
  const std::uint64_t actual = r.remaining();
  if (actual < expected) {
    throw FormatError(std::string("truncated ") + what + ": expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(actual),
                      r.offset() + actual);
  }
  if (actual > expected) {
    throw FormatError(std::string("trailing bytes after ") + what + ": expected " +
                          std::to_string(expected) + " bytes, got " + std::to_string(actual),
                      r.offset() + expected);
  }
}

// a * b with overflow reported as CapacityError.
std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const char* what) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    throw CapacityError(std::string(what) + " overflows 64 bits", std::numeric_limits<std::uint64_t>::max());
  }
  return a * b;
}

SceneFileHeader parse_scene_header(ByteReader& r) {
  r.expect_magic(kSceneMagic, "a scene file");
  SceneFileHeader h;
  h.version = r.u16();
  if (h.version != kSceneFormatVersion) {
    throw FormatError("unsupported scene version " + std::to_string(h.version), 4);
  }
  h.class_count = r.u16();
  if (h.class_count == 0 || h.class_count > kMaxClassCount) {
    throw FormatError("class count " + std::to_string(h.class_count) + " outside [1, 255]", 6);
  }
  h.gaussian_count = r.u64();
  return h;
}

GridFileHeader parse_grid_header(ByteReader& r) {
  r.expect_magic(kGridMagic, "a grid file");
  GridFileHeader h;
  h.version = r.u16();
  if (h.version != kGridFormatVersion) {
    throw FormatError("unsupported grid version " + std::to_string(h.version), 4);
  }
  h.class_count = r.u16();
  if (h.class_count == 0 || h.class_count > kMaxClassCount) {
    throw FormatError("class count " + std::to_string(h.class_count) + " outside [1, 255]", 6);
  }
  for (int a = 0; a < 3; ++a) {
    const std::size_t at = r.offset();
    h.spec.dims[a] = r.u32();
    if (h.spec.dims[a] == 0) throw FormatError("grid dimension is zero", at);
  }
  for (int a = 0; a < 3; ++a) {
    const std::size_t at = r.offset();
    h.spec.origin[a] = r.f32();
    if (!std::isfinite(h.spec.origin[a])) throw FormatError("grid origin is not finite", at);
  }
  for (int a = 0; a < 3; ++a) {
    const std::size_t at = r.offset();
    h.spec.cell_size[a] = r.f32();
    if (!(h.spec.cell_size[a] > 0.0f) || !std::isfinite(h.spec.cell_size[a])) {
      throw FormatError("grid cell size must be positive and finite", at);
    }
  }
  const std::size_t kind_at = r.offset();
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw FormatError("unknown payload kind " + std::to_string(kind), kind_at);
  h.payload = static_cast<PayloadKind>(kind);
  h.spec.validate();  // CapacityError for oversize dims
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_scene(const GaussianScene& scene) {
  const std::size_t classes = scene.class_count();
  if (classes > std::numeric_limits<std::uint16_t>::max()) {
    throw CapacityError("class count exceeds 16 bits", classes);
  }
  ByteWriter w(kSceneHeaderSize + scene.size() * (10 + classes) * 4);
  w.magic(kSceneMagic);
  w.u16(kSceneFormatVersion);
  w.u16(static_cast<std::uint16_t>(classes));
  w.u64(scene.size());
  for (const SemanticGaussian& g : scene) {
    for (int a = 0; a < 3; ++a) w.f32(g.mean[a]);
    for (int a = 0; a < 3; ++a) w.f32(g.scale[a]);
    for (int a = 0; a < 4; ++a) w.f32(g.rotation[a]);
    for (const float c : g.logits) w.f32(c);
  }
  return w.take();
}

SceneFileHeader decode_scene_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  return parse_scene_header(r);
}

GaussianScene decode_scene(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const SceneFileHeader h = parse_scene_header(r);
  const std::uint64_t record_bytes = (10 + std::uint64_t{h.class_count}) * 4;
  const std::uint64_t expected = checked_mul(h.gaussian_count, record_bytes, "scene record section");
  check_payload_length(r, expected, "record section");

  GaussianScene scene(h.class_count);
  scene.reserve(static_cast<std::size_t>(h.gaussian_count));
  for (std::uint64_t g = 0; g < h.gaussian_count; ++g) {
    const std::size_t at = r.offset();
    SemanticGaussian sg;
    for (int a = 0; a < 3; ++a) sg.mean[a] = r.f32_unchecked();
    for (int a = 0; a < 3; ++a) sg.scale[a] = r.f32_unchecked();
    for (int a = 0; a < 4; ++a) sg.rotation[a] = r.f32_unchecked();
    sg.logits.resize(h.class_count);
    for (float& c : sg.logits) c = r.f32_unchecked();

    if (!sg.mean.allFinite()) throw FormatError("gaussian " + std::to_string(g) + " has a non-finite mean", at);
    for (int a = 0; a < 3; ++a) {
      if (!(sg.scale[a] > 0.0f) || !std::isfinite(sg.scale[a])) {
        throw FormatError("gaussian " + std::to_string(g) + " has a non-positive scale", at + 12);
      }
    }
    const double qn = sg.rotation.cast<double>().norm();
    if (!(std::abs(qn - 1.0) <= 1e-5)) {
      throw FormatError("gaussian " + std::to_string(g) + " rotation is not a unit quaternion", at + 24);
    }
    scene.add(std::move(sg));
  }
  return scene;
}

std::vector<std::uint8_t> encode_grid(const OccupancyGrid& grid) {
  grid.validate();
  const std::size_t n = grid.labels.size();
  ByteWriter w(kGridHeaderSize + n + grid.scores.size() * 4);
  w.magic(kGridMagic);
  w.u16(kGridFormatVersion);
  w.u16(static_cast<std::uint16_t>(grid.class_count));
  for (int a = 0; a < 3; ++a) w.u32(grid.spec.dims[a]);
  for (int a = 0; a < 3; ++a) w.f32(grid.spec.origin[a]);
  for (int a = 0; a < 3; ++a) w.f32(grid.spec.cell_size[a]);
  w.u8(static_cast<std::uint8_t>(grid.has_scores() ? PayloadKind::labels_and_scores : PayloadKind::labels));
  w.bytes(grid.labels);
  for (const float s : grid.scores) w.f32(s);
  return w.take();
}

GridFileHeader decode_grid_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  return parse_grid_header(r);
}

OccupancyGrid decode_grid(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const GridFileHeader h = parse_grid_header(r);
  const std::uint64_t voxels = h.spec.voxel_count();
  std::uint64_t expected = voxels;
  if (h.payload == PayloadKind::labels_and_scores) {
    expected += checked_mul(checked_mul(voxels, h.class_count, "score section"), 4, "score section");
  }
  check_payload_length(r, expected, "grid payload");

  OccupancyGrid grid(h.spec, h.class_count, h.payload == PayloadKind::labels_and_scores);
  const std::size_t labels_at = r.offset();
  const auto labels = r.take(static_cast<std::size_t>(voxels));
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] != kIgnoreLabel && labels[v] >= h.class_count) {
      throw FormatError("label " + std::to_string(labels[v]) + " is not below class count " +
                            std::to_string(h.class_count),
                        labels_at + v);
    }
  }
  grid.labels.assign(labels.begin(), labels.end());
  for (float& s : grid.scores) s = r.f32_unchecked();
  return grid;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::streamsize size = in.tellg();
  if (size < 0) throw IoError("cannot determine size of '" + path.string() + "'");
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.seekg(0);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw IoError("failed reading '" + path.string() + "'");
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_scene(const GaussianScene& scene, const std::filesystem::path& path) {
  write_file_bytes(path, encode_scene(scene));
}

GaussianScene read_scene(const std::filesystem::path& path) {
  return decode_scene(read_file_bytes(path));
}

void write_grid(const OccupancyGrid& grid, const std::filesystem::path& path) {
  write_file_bytes(path, encode_grid(grid));
}

OccupancyGrid read_grid(const std::filesystem::path& path) {
  return decode_grid(read_file_bytes(path));
}

FileHeader read_header(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kGridMagic.data(), 4) == 0) {
    return decode_grid_header(bytes);
  }
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kSceneMagic.data(), 4) == 0) {
    return decode_scene_header(bytes);
  }
  throw FormatError("unrecognized magic, expected \"SGAU\" or \"SVOX\"", 0);
}

}  // namespace gsocc
