#ifndef GLCM_IO_HPP
#define GLCM_IO_HPP

// Image, mask, config and dataset serialization.
//
// Images: binary PGM (P5, maxval <= 255) or raw float32:
//   "GLCMF32\0" magic (8 bytes), u32 height, u32 width (little-endian), then
//   height*width little-endian float32 pixels, row-major.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "glcm/error.hpp"
#include "glcm/phantom.hpp"
#include "glcm/tensor.hpp"
#include "glcm/toy_denoiser.hpp"

namespace glcm {

inline constexpr std::array<char, 8> kRawMagic{'G', 'L', 'C', 'M', 'F', '3', '2', '\0'};

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void write_pgm(std::ostream& os, int height, int width, const std::vector<std::uint8_t>& px) {
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

inline void write_pgm(const std::string& path, const Image& im) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  std::vector<std::uint8_t> px(im.size());
  std::transform(im.pixels.begin(), im.pixels.end(), px.begin(), to_byte);
  write_pgm(os, im.height, im.width, px);
}

// Masks are stored as 0 / 255.
inline void write_pgm(const std::string& path, const Mask& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  std::vector<std::uint8_t> px(m.size());
  std::transform(m.bits.begin(), m.bits.end(), px.begin(),
                 [](std::uint8_t b) { return b ? std::uint8_t{255} : std::uint8_t{0}; });
  write_pgm(os, m.height, m.width, px);
}

namespace detail {
inline int read_pgm_int(std::istream& is) {
  int c;
  while ((c = is.peek()) != EOF) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(is >> v)) throw ConfigError("malformed PGM header");
  return v;
}

inline std::vector<std::uint8_t> read_pgm_bytes(const std::string& path, int& h, int& w) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  char magic[2];
  if (!is.read(magic, 2) || magic[0] != 'P' || magic[1] != '5')
    throw ConfigError(path + ": not a binary PGM (P5)");
  w = read_pgm_int(is);
  h = read_pgm_int(is);
  const int maxval = read_pgm_int(is);
  if (w <= 0 || h <= 0) throw ConfigError(path + ": bad PGM dimensions");
  if (maxval <= 0 || maxval > 255) throw ConfigError(path + ": only 8-bit PGM is supported");
  is.get();  // single whitespace after maxval
  std::vector<std::uint8_t> px(static_cast<std::size_t>(h) * w);
  if (!is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size())))
    throw ConfigError(path + ": truncated PGM data");
  if (maxval != 255)
    for (auto& p : px) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
  return px;
}
}  // namespace detail

inline Image read_pgm(const std::string& path) {
  int h, w;
  const auto px = detail::read_pgm_bytes(path, h, w);
  Image im(h, w);
  for (std::size_t i = 0; i < px.size(); ++i) im.pixels[i] = px[i] / 255.0;
  return im;
}

// Any value above 127 is inside the mask.
inline Mask read_mask_pgm(const std::string& path) {
  int h, w;
  const auto px = detail::read_pgm_bytes(path, h, w);
  Mask m(h, w);
  for (std::size_t i = 0; i < px.size(); ++i) m.bits[i] = px[i] > 127 ? 1 : 0;
  return m;
}

inline void write_raw(const std::string& path, const Image& im) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  os.write(kRawMagic.data(), kRawMagic.size());
  detail::put_u32(os, static_cast<std::uint32_t>(im.height));
  detail::put_u32(os, static_cast<std::uint32_t>(im.width));
  for (double p : im.pixels) detail::put_f32(os, static_cast<float>(p));
}

inline Image read_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kRawMagic)
    throw ConfigError(path + ": bad raw float32 magic");
  const auto h = static_cast<int>(detail::get_u32(is));
  const auto w = static_cast<int>(detail::get_u32(is));
  Image im(h, w);
  for (double& p : im.pixels) p = detail::get_f32(is);
  return im;
}

inline bool has_extension(const std::string& path, const std::string& ext) {
  return std::filesystem::path(path).extension() == ext;
}

// Dispatches on extension: .pgm, otherwise raw float32.
inline Image read_image(const std::string& path) {
  return has_extension(path, ".pgm") ? read_pgm(path) : read_raw(path);
}

inline void write_image(const std::string& path, const Image& im) {
  if (has_extension(path, ".pgm")) write_pgm(path, im);
  else write_raw(path, im);
}

// Raw images carry no mask convention; a raw mask is anything > 0.5.
inline Mask read_mask(const std::string& path) {
  if (has_extension(path, ".pgm")) return read_mask_pgm(path);
  const Image im = read_raw(path);
  Mask m(im.height, im.width);
  for (std::size_t i = 0; i < im.size(); ++i) m.bits[i] = im.pixels[i] > 0.5 ? 1 : 0;
  return m;
}

// `key = value` lines; `#` starts a comment. Later keys override earlier ones.
class KeyValueConfig {
public:
  static KeyValueConfig parse(std::istream& is, const std::string& origin = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    return parse(is, path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  double get(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not a number: " + it->second);
    }
  }
  long long get_int(const std::string& key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not an integer: " + it->second);
    }
  }
  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + key + "': not a boolean: " + it->second);
  }

private:
  std::map<std::string, std::string> values_;
};

// Dataset directory: {id}_cxr.pgm, {id}_soft.pgm, {id}_lung.pgm, {id}_bone.pgm and
// manifest.csv with one row per sample.

inline std::string phantom_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ph%05zu", index);
  return buf;
}

struct DatasetEntry {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t index = 0;
  int size = 0;
  Image cxr, soft;
  Mask lung, bone;
};

inline void write_dataset(const std::string& dir, const std::vector<PhantomSample>& samples) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) throw ConfigError("cannot write manifest in " + dir);
  manifest << "id,seed,index,size,rib_count,rib_amplitude_mean,lung_l_cx,lung_l_cy,lung_l_ax,"
              "lung_l_ay,lung_r_cx,lung_r_cy,lung_r_ax,lung_r_ay,texture_scale\n";
  for (const auto& s : samples) {
    const std::string id = phantom_id(s.index);
    const auto base = (fs::path(dir) / id).string();
    write_pgm(base + "_cxr.pgm", s.cxr);
    write_pgm(base + "_soft.pgm", s.soft);
    write_pgm(base + "_lung.pgm", s.lung_mask);
    write_pgm(base + "_bone.pgm", s.bone_mask);
    double amp = 0.0;
    for (const auto& r : s.params.ribs) amp += r.amplitude;
    amp /= static_cast<double>(std::max<std::size_t>(1, s.params.ribs.size()));
    char buf[512];
    const auto& L = s.params.lungs;
    std::snprintf(buf, sizeof buf,
                  "%s,%llu,%zu,%d,%zu,%.6f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n",
                  id.c_str(), static_cast<unsigned long long>(s.seed), s.index, s.params.size,
                  s.params.ribs.size(), amp, L[0].cx, L[0].cy, L[0].ax, L[0].ay, L[1].cx, L[1].cy,
                  L[1].ax, L[1].ay, s.params.texture_scale);
    manifest << buf;
  }
}

inline std::vector<DatasetEntry> read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) throw ConfigError("no manifest.csv in " + dir);
  std::string line;
  std::getline(manifest, line);  // header
  std::vector<DatasetEntry> out;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (cells.size() < 4) throw ConfigError("malformed manifest row: " + line);
    DatasetEntry e;
    e.id = cells[0];
    e.seed = std::stoull(cells[1]);
    e.index = std::stoull(cells[2]);
    e.size = std::stoi(cells[3]);
    const auto base = (fs::path(dir) / e.id).string();
    e.cxr = read_pgm(base + "_cxr.pgm");
    e.soft = read_pgm(base + "_soft.pgm");
    e.lung = read_mask_pgm(base + "_lung.pgm");
    e.bone = read_mask_pgm(base + "_bone.pgm");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace glcm

#endif  // GLCM_IO_HPP
