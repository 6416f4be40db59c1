#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcdp/errors.hpp"
#include "mcdp/grid.hpp"
#include "mcdp/scene.hpp"
#include "mcdp/synth.hpp"

namespace mcdp {

namespace io_detail {

inline std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw MissingFile("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_all(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw MissingFile("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw MissingFile("short write to '" + path.string() + "'");
}

inline void put_u16(std::string& out, std::uint16_t x) {
  out.push_back(static_cast<char>(x & 0xff));
  out.push_back(static_cast<char>((x >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float x) {
  std::uint32_t bits;
  static_assert(sizeof(bits) == sizeof(x));
  std::memcpy(&bits, &x, sizeof(bits));
  put_u32(out, bits);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float x;
  std::memcpy(&x, &bits, sizeof(x));
  return x;
}

inline std::string full_precision(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Depth grid files: "MCDP" magic, u16 format version, u32 width, u32 height,
// all little-endian, then height*width little-endian IEEE float32 row-major.
// Non-positive or non-finite values mean invalid.
// ---------------------------------------------------------------------------

constexpr std::uint16_t kDepthGridVersion = 1;

inline void save_depth_grid(const std::filesystem::path& path, const DepthMap& map) {
  std::string out;
  out.reserve(18 + 4 * static_cast<std::size_t>(map.values.size()));
  out += "MCDP";
  io_detail::put_u16(out, kDepthGridVersion);
  io_detail::put_u32(out, static_cast<std::uint32_t>(map.width()));
  io_detail::put_u32(out, static_cast<std::uint32_t>(map.height()));
  for (int v = 0; v < map.height(); ++v)
    for (int u = 0; u < map.width(); ++u)
      io_detail::put_f32(out, map.is_valid(u, v) ? static_cast<float>(map.values.at(u, v)) : 0.0f);
  io_detail::write_all(path, out);
}

inline DepthMap load_depth_grid(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_all(path);
  if (bytes.size() < 14)
    throw ParseError("'" + path.string() + "': truncated depth grid header");
  if (bytes[0] != 'M' || bytes[1] != 'C' || bytes[2] != 'D' || bytes[3] != 'P')
    throw ParseError("'" + path.string() + "': bad depth grid magic");
  const std::uint16_t version = io_detail::get_u16(bytes.data() + 4);
  if (version != kDepthGridVersion)
    throw ParseError("'" + path.string() + "': unsupported depth grid version " +
                     std::to_string(version));
  const std::uint32_t w = io_detail::get_u32(bytes.data() + 6);
  const std::uint32_t h = io_detail::get_u32(bytes.data() + 10);
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
    throw ParseError("'" + path.string() + "': implausible depth grid size");
  const std::size_t expected = 14 + 4 * static_cast<std::size_t>(w) * h;
  if (bytes.size() != expected)
    throw ParseError("'" + path.string() + "': payload length " +
                     std::to_string(bytes.size()) + " does not match header (expected " +
                     std::to_string(expected) + ")");
  DepthMap map(static_cast<int>(w), static_cast<int>(h));
  const std::uint8_t* p = bytes.data() + 14;
  for (int v = 0; v < map.height(); ++v)
    for (int u = 0; u < map.width(); ++u, p += 4) {
      const float d = io_detail::get_f32(p);
      if (std::isfinite(d) && d > 0.0f) map.set(u, v, d);
    }
  return map;
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval 255): images store intensity/255, masks are strictly
// 0 = excluded / 255 = kept.
// ---------------------------------------------------------------------------

namespace io_detail {

struct Pgm {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};

inline Pgm load_pgm(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(bytes[pos++]);
    if (tok.empty())
      throw ParseError("'" + path.string() + "': truncated PGM header");
    return tok;
  };
  if (next_token() != "P5")
    throw ParseError("'" + path.string() + "': not a binary PGM (P5)");
  Pgm pgm;
  try {
    pgm.width = std::stoi(next_token());
    pgm.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval != 255)
      throw ParseError("'" + path.string() + "': PGM maxval must be 255");
  } catch (const std::invalid_argument&) {
    throw ParseError("'" + path.string() + "': malformed PGM header");
  }
  if (pgm.width <= 0 || pgm.height <= 0)
    throw ParseError("'" + path.string() + "': bad PGM dimensions");
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(pgm.width) * pgm.height;
  if (bytes.size() - pos < need)
    throw ParseError("'" + path.string() + "': truncated PGM payload");
  pgm.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + need);
  return pgm;
}

inline void save_pgm(const std::filesystem::path& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  write_all(path, out);
}

}  // namespace io_detail

inline GrayImage load_image(const std::filesystem::path& path) {
  const auto pgm = io_detail::load_pgm(path);
  GrayImage img(pgm.width, pgm.height);
  for (int v = 0; v < pgm.height; ++v)
    for (int u = 0; u < pgm.width; ++u)
      img.at(u, v) = pgm.pixels[static_cast<std::size_t>(v) * pgm.width + u] / 255.0;
  return img;
}

inline void save_image(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(img.width()) * img.height());
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      const double x = std::min(std::max(img.at(u, v), 0.0), 1.0);
      px[static_cast<std::size_t>(v) * img.width() + u] =
          static_cast<std::uint8_t>(std::lround(x * 255.0));
    }
  io_detail::save_pgm(path, img.width(), img.height(), px);
}

inline OcclusionMask load_mask(const std::filesystem::path& path) {
  const auto pgm = io_detail::load_pgm(path);
  OcclusionMask mask(pgm.width, pgm.height);
  for (int v = 0; v < pgm.height; ++v)
    for (int u = 0; u < pgm.width; ++u) {
      const std::uint8_t x = pgm.pixels[static_cast<std::size_t>(v) * pgm.width + u];
      if (x != 0 && x != 255)
        throw ValidationError("'" + path.string() + "': mask values must be 0 or 255, found " +
                              std::to_string(int(x)));
      mask.keep.at(u, v) = (x == 255) ? 1 : 0;
    }
  return mask;
}

inline void save_mask(const std::filesystem::path& path, const OcclusionMask& mask) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(mask.width()) * mask.height());
  for (int v = 0; v < mask.height(); ++v)
    for (int u = 0; u < mask.width(); ++u)
      px[static_cast<std::size_t>(v) * mask.width() + u] = mask.kept(u, v) ? 255 : 0;
  io_detail::save_pgm(path, mask.width(), mask.height(), px);
}

// ---------------------------------------------------------------------------
// Rig configuration: human-readable key/value text with one section per
// camera, so fixtures can be hand-authored.
//
//   rig 1
//   camera front
//   intrinsics fx fy cx cy width height
//   pose camera_to_world            (or world_to_camera)
//   rotation r00 ... r22            (row-major)
//   translation tx ty tz
//   image front_image.pgm
//   basis front_basis0.mcdp         (repeat, in order)
//   mask front_mask.pgm
//   gt gt/front.mcdp                (optional)
//   end
//   adjacency front left            (project 'left' into 'front')
// ---------------------------------------------------------------------------

namespace io_detail {

struct Tokens {
  std::vector<std::string> items;
  int line = 0;
};

inline std::vector<Tokens> tokenize_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw MissingFile("cannot open '" + path.string() + "'");
  std::vector<Tokens> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    Tokens t;
    t.line = lineno;
    std::string tok;
    while (ss >> tok) t.items.push_back(tok);
    if (!t.items.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline double parse_number(const std::filesystem::path& path, const Tokens& t,
                           const std::string& tok) {
  try {
    std::size_t used = 0;
    const double x = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return x;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ":" + std::to_string(t.line) + ": expected a number, got '" +
                     tok + "'");
  }
}

inline int parse_int(const std::filesystem::path& path, const Tokens& t, const std::string& tok) {
  const double x = parse_number(path, t, tok);
  const int i = static_cast<int>(x);
  if (static_cast<double>(i) != x)
    throw ParseError(path.string() + ":" + std::to_string(t.line) + ": expected an integer, got '" +
                     tok + "'");
  return i;
}

[[noreturn]] inline void fail(const std::filesystem::path& path, const Tokens& t,
                              const std::string& msg) {
  throw ParseError(path.string() + ":" + std::to_string(t.line) + ": " + msg);
}

}  // namespace io_detail

inline RigScene load_rig(const std::filesystem::path& path) {
  using io_detail::fail;
  const auto lines = io_detail::tokenize_lines(path);
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  auto resolve = [&](const std::string& rel) { return dir / rel; };

  RigScene scene;
  std::vector<std::pair<std::string, std::string>> adjacency_names;
  std::size_t i = 0;
  if (lines.empty() || lines[0].items.size() != 2 || lines[0].items[0] != "rig")
    throw ParseError(path.string() + ":1: expected header 'rig <version>'");
  if (lines[0].items[1] != "1")
    throw ParseError(path.string() + ":1: unsupported rig version '" + lines[0].items[1] + "'");
  ++i;

  while (i < lines.size()) {
    const auto& t = lines[i];
    if (t.items[0] == "adjacency") {
      if (t.items.size() != 3) fail(path, t, "adjacency needs two camera names");
      adjacency_names.emplace_back(t.items[1], t.items[2]);
      ++i;
      continue;
    }
    if (t.items[0] != "camera" || t.items.size() != 2)
      fail(path, t, "expected 'camera <name>' or 'adjacency <target> <source>'");
    CameraView cam;
    cam.name = t.items[1];
    std::optional<CameraIntrinsics> intr;
    std::optional<Eigen::Matrix3d> rot;
    std::optional<Eigen::Vector3d> trans;
    std::string convention = "camera_to_world";
    std::string image_path, mask_path, gt_path;
    std::vector<std::string> basis_paths;
    ++i;
    bool closed = false;
    for (; i < lines.size(); ++i) {
      const auto& kv = lines[i];
      const auto& key = kv.items[0];
      if (key == "end") {
        closed = true;
        ++i;
        break;
      }
      if (key == "intrinsics") {
        if (kv.items.size() != 7) fail(path, kv, "intrinsics needs fx fy cx cy width height");
        try {
          intr = CameraIntrinsics(io_detail::parse_number(path, kv, kv.items[1]),
                                  io_detail::parse_number(path, kv, kv.items[2]),
                                  io_detail::parse_number(path, kv, kv.items[3]),
                                  io_detail::parse_number(path, kv, kv.items[4]),
                                  io_detail::parse_int(path, kv, kv.items[5]),
                                  io_detail::parse_int(path, kv, kv.items[6]));
        } catch (const ValidationError& e) {
          throw ValidationError("camera '" + cam.name + "': " + e.what());
        }
      } else if (key == "pose") {
        if (kv.items.size() != 2 ||
            (kv.items[1] != "camera_to_world" && kv.items[1] != "world_to_camera"))
          fail(path, kv, "pose must be camera_to_world or world_to_camera");
        convention = kv.items[1];
      } else if (key == "rotation") {
        if (kv.items.size() != 10) fail(path, kv, "rotation needs 9 numbers (row-major)");
        Eigen::Matrix3d R;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c)
            R(r, c) = io_detail::parse_number(path, kv, kv.items[1 + 3 * r + c]);
        rot = R;
      } else if (key == "translation") {
        if (kv.items.size() != 4) fail(path, kv, "translation needs 3 numbers");
        trans = Eigen::Vector3d(io_detail::parse_number(path, kv, kv.items[1]),
                                io_detail::parse_number(path, kv, kv.items[2]),
                                io_detail::parse_number(path, kv, kv.items[3]));
      } else if (key == "image") {
        if (kv.items.size() != 2) fail(path, kv, "image needs a path");
        image_path = kv.items[1];
      } else if (key == "basis") {
        if (kv.items.size() != 2) fail(path, kv, "basis needs a path");
        basis_paths.push_back(kv.items[1]);
      } else if (key == "mask") {
        if (kv.items.size() != 2) fail(path, kv, "mask needs a path");
        mask_path = kv.items[1];
      } else if (key == "gt") {
        if (kv.items.size() != 2) fail(path, kv, "gt needs a path");
        gt_path = kv.items[1];
      } else {
        fail(path, kv, "unknown camera field '" + key + "'");
      }
    }
    if (!closed) fail(path, lines.back(), "camera '" + cam.name + "' section missing 'end'");
    if (!intr) fail(path, t, "camera '" + cam.name + "' has no intrinsics");
    if (!rot || !trans) fail(path, t, "camera '" + cam.name + "' has no pose");
    if (image_path.empty()) fail(path, t, "camera '" + cam.name + "' has no image");
    if (mask_path.empty()) fail(path, t, "camera '" + cam.name + "' has no mask");
    if (basis_paths.empty()) fail(path, t, "camera '" + cam.name + "' has no basis");

    cam.intrinsics = *intr;
    try {
      const CameraExtrinsics pose(*rot, *trans);
      cam.cam_to_world = (convention == "camera_to_world") ? pose : pose.inverse();
    } catch (const ValidationError& e) {
      throw ValidationError("camera '" + cam.name + "': " + e.what());
    }
    cam.image = load_image(resolve(image_path));
    cam.mask = load_mask(resolve(mask_path));
    std::vector<Grid<double>> bases;
    for (const auto& bp : basis_paths) {
      const DepthMap grid = load_depth_grid(resolve(bp));
      Grid<double> b(grid.width(), grid.height(), 0.0);
      for (int v = 0; v < grid.height(); ++v)
        for (int u = 0; u < grid.width(); ++u) b.at(u, v) = grid.values.at(u, v);
      bases.push_back(std::move(b));
    }
    cam.bases = DepthBasisSet(std::move(bases));
    if (!gt_path.empty()) cam.gt_depth = load_depth_grid(resolve(gt_path));
    scene.cameras.push_back(std::move(cam));
  }

  for (const auto& [target, source] : adjacency_names)
    scene.adjacency.push_back({scene.index_of(target), scene.index_of(source)});
  scene.check();
  return scene;
}

/// Writes the scene as a config plus all referenced grids next to it.
inline void save_rig(const std::filesystem::path& config_path, const RigScene& scene) {
  const auto dir =
      config_path.has_parent_path() ? config_path.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  std::string cfg = "rig 1\n";
  for (const auto& cam : scene.cameras) {
    cfg += "\ncamera " + cam.name + "\n";
    cfg += "intrinsics " + io_detail::full_precision(cam.intrinsics.fx) + " " +
           io_detail::full_precision(cam.intrinsics.fy) + " " +
           io_detail::full_precision(cam.intrinsics.cx) + " " +
           io_detail::full_precision(cam.intrinsics.cy) + " " +
           std::to_string(cam.intrinsics.width) + " " + std::to_string(cam.intrinsics.height) +
           "\n";
    cfg += "pose camera_to_world\n";
    cfg += "rotation";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        cfg += " " + io_detail::full_precision(cam.cam_to_world.rotation(r, c));
    cfg += "\ntranslation";
    for (int r = 0; r < 3; ++r)
      cfg += " " + io_detail::full_precision(cam.cam_to_world.translation(r));
    cfg += "\n";
    const std::string image_rel = cam.name + "_image.pgm";
    const std::string mask_rel = cam.name + "_mask.pgm";
    save_image(dir / image_rel, cam.image);
    save_mask(dir / mask_rel, cam.mask);
    cfg += "image " + image_rel + "\n";
    for (int k = 0; k < cam.bases.count(); ++k) {
      const std::string basis_rel = cam.name + "_basis" + std::to_string(k) + ".mcdp";
      DepthMap as_map(cam.bases.width(), cam.bases.height());
      for (int v = 0; v < as_map.height(); ++v)
        for (int u = 0; u < as_map.width(); ++u) {
          const double x = cam.bases.bases[k].at(u, v);
          if (std::isfinite(x) && x > 0.0) as_map.set(u, v, x);
        }
      save_depth_grid(dir / basis_rel, as_map);
      cfg += "basis " + basis_rel + "\n";
    }
    cfg += "mask " + mask_rel + "\n";
    if (cam.gt_depth) {
      const std::string gt_rel = "gt/" + cam.name + ".mcdp";
      save_depth_grid(dir / gt_rel, *cam.gt_depth);
      cfg += "gt " + gt_rel + "\n";
    }
    cfg += "end\n";
  }
  cfg += "\n";
  for (const auto& pair : scene.adjacency)
    cfg += "adjacency " + scene.cameras[pair.target].name + " " +
           scene.cameras[pair.source].name + "\n";
  io_detail::write_all(config_path, cfg);
}

// ---------------------------------------------------------------------------
// Scene spec files for the synth command.
// ---------------------------------------------------------------------------

inline SceneSpec load_scene_spec(const std::filesystem::path& path) {
  using io_detail::fail;
  const auto lines = io_detail::tokenize_lines(path);
  if (lines.empty() || lines[0].items.size() != 2 || lines[0].items[0] != "scene" ||
      lines[0].items[1] != "1")
    throw ParseError(path.string() + ":1: expected header 'scene 1'");
  SceneSpec spec;
  spec.camera_count = 0;  // must be set explicitly
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& t = lines[i];
    const auto& key = t.items[0];
    auto num = [&](std::size_t k) { return io_detail::parse_number(path, t, t.items[k]); };
    auto integer = [&](std::size_t k) { return io_detail::parse_int(path, t, t.items[k]); };
    auto need = [&](std::size_t n, const char* usage) {
      if (t.items.size() != n + 1) fail(path, t, std::string("usage: ") + usage);
    };
    if (key == "seed") {
      need(1, "seed <n>");
      spec.seed = static_cast<std::uint64_t>(integer(1));
    } else if (key == "cameras") {
      need(1, "cameras <n>");
      spec.camera_count = integer(1);
    } else if (key == "yaw_spacing_deg") {
      need(1, "yaw_spacing_deg <deg>");
      spec.yaw_spacing_deg = num(1);
    } else if (key == "ring_radius") {
      need(1, "ring_radius <m>");
      spec.ring_radius = num(1);
    } else if (key == "image") {
      need(2, "image <width> <height>");
      spec.image_width = integer(1);
      spec.image_height = integer(2);
    } else if (key == "focal") {
      need(1, "focal <px>");
      spec.focal = num(1);
    } else if (key == "principal") {
      need(2, "principal <cx> <cy>");
      spec.principal = Pixel{num(1), num(2)};
    } else if (key == "wall") {
      need(3, "wall <radius> <height> <segments>");
      add_wall(spec, num(1), num(2), integer(3));
    } else if (key == "ground") {
      need(2, "ground <y> <extent>");
      add_ground(spec, num(1), num(2));
    } else if (key == "sphere") {
      need(4, "sphere <x> <y> <z> <radius>");
      add_sphere(spec, Eigen::Vector3d(num(1), num(2), num(3)), num(4));
    } else if (key == "rect") {
      need(11, "rect <cx cy cz> <eux euy euz> <evx evy evz> <hu> <hv>");
      RectPrimitive r;
      r.center = Eigen::Vector3d(num(1), num(2), num(3));
      r.edge_u = Eigen::Vector3d(num(4), num(5), num(6)).normalized();
      r.edge_v = Eigen::Vector3d(num(7), num(8), num(9)).normalized();
      r.half_u = num(10);
      r.half_v = num(11);
      r.texture_seed = static_cast<std::uint32_t>(spec.rects.size() + spec.spheres.size());
      spec.rects.push_back(r);
    } else if (key == "basis") {
      need(2, "basis <scale-family|noise-family|mixed> <n>");
      if (t.items[1] == "scale-family")
        spec.basis_kind = BasisKind::scale_family;
      else if (t.items[1] == "noise-family")
        spec.basis_kind = BasisKind::noise_family;
      else if (t.items[1] == "mixed")
        spec.basis_kind = BasisKind::mixed;
      else
        fail(path, t, "unknown basis kind '" + t.items[1] + "'");
      spec.basis_count = integer(2);
    } else if (key == "basis_scale") {
      need(2, "basis_scale <camera_index> <scale>");
      const int idx = integer(1);
      if (idx < 0) fail(path, t, "camera index must be >= 0");
      if (static_cast<int>(spec.basis_scale.size()) <= idx)
        spec.basis_scale.resize(idx + 1, 1.0);
      spec.basis_scale[idx] = num(2);
    } else if (key == "basis_pin") {
      need(1, "basis_pin <camera_index>");
      const int idx = integer(1);
      if (idx < 0) fail(path, t, "camera index must be >= 0");
      if (static_cast<int>(spec.basis_pin.size()) <= idx) spec.basis_pin.resize(idx + 1, false);
      spec.basis_pin[idx] = true;
    } else if (key == "noise_amplitude") {
      need(1, "noise_amplitude <m>");
      spec.noise_amplitude = num(1);
    } else if (key == "mask_bottom_rows") {
      need(1, "mask_bottom_rows <n>");
      spec.mask_bottom_rows = integer(1);
    } else {
      fail(path, t, "unknown scene field '" + key + "'");
    }
  }
  if (spec.camera_count == 0)
    throw ParseError(path.string() + ": scene spec never sets 'cameras'");
  spec.check();
  return spec;
}

}  // namespace mcdp
