#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polsar/raster.hpp"

namespace polsar {

/// Parse failure in an on-disk artifact; carries the offending file and,
/// for binary planes, the byte offset of the first bad value.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::filesystem::path path, std::string detail,
             std::optional<std::uint64_t> offset = std::nullopt)
      : std::runtime_error(format(path, detail, offset)),
        path_(std::move(path)), detail_(std::move(detail)), offset_(offset) {}

  const std::filesystem::path& path() const { return path_; }
  const std::string& detail() const { return detail_; }
  std::optional<std::uint64_t> offset() const { return offset_; }

 private:
  static std::string format(const std::filesystem::path& p,
                            const std::string& d,
                            std::optional<std::uint64_t> off) {
    std::ostringstream os;
    os << p.string() << ": " << d;
    if (off) os << " (byte offset " << *off << ")";
    return os.str();
  }

  std::filesystem::path path_;
  std::string detail_;
  std::optional<std::uint64_t> offset_;
};

/// Semantic validation failure (overlapping regions, bad palette, ...).
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline const char* const kPlaneNames[9] = {
    "C11.bin", "C12_real.bin", "C12_imag.bin",
    "C13_real.bin", "C13_imag.bin", "C22.bin",
    "C23_real.bin", "C23_imag.bin", "C33.bin"};

// Channel index in FeatureVector order for each plane name above.
inline const int kPlaneChannel[9] = {0, 3, 4, 5, 6, 1, 7, 8, 2};

inline void append_f32le(std::vector<unsigned char>& buf, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  buf.push_back(static_cast<unsigned char>(u & 0xff));
  buf.push_back(static_cast<unsigned char>((u >> 8) & 0xff));
  buf.push_back(static_cast<unsigned char>((u >> 16) & 0xff));
  buf.push_back(static_cast<unsigned char>((u >> 24) & 0xff));
}

inline float read_f32le(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError(p, "cannot open file");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return buf;
}

inline void write_file(const std::filesystem::path& p,
                       const void* data, std::size_t size) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(p, "cannot open file for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw ParseError(p, "write failed");
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Write the covariance directory format: config.txt plus nine row-major
/// little-endian float32 planes (C11, C12_real, ..., C33).
inline void write_covariance_dir(const CovarianceImage& img,
                                 const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ostringstream os;
    os << "Nrow " << img.height() << "\n"
       << "Ncol " << img.width() << "\n"
       << "Looks " << detail::format_double(img.looks()) << "\n";
    const std::string s = os.str();
    detail::write_file(dir / "config.txt", s.data(), s.size());
  }
  for (int plane = 0; plane < 9; ++plane) {
    const int ch = detail::kPlaneChannel[plane];
    std::vector<unsigned char> buf;
    buf.reserve(img.size() * 4);
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double v = to_feature_vector(img[i])[static_cast<std::size_t>(ch)];
      const float f = static_cast<float>(v);
      if (!std::isfinite(f))
        throw std::invalid_argument(
            std::string("write_covariance_dir: value not representable as "
                        "finite float32 in plane ") +
            detail::kPlaneNames[plane] + " at pixel " + std::to_string(i));
      detail::append_f32le(buf, f);
    }
    detail::write_file(dir / detail::kPlaneNames[plane], buf.data(), buf.size());
  }
}

namespace detail {

struct DirHeader {
  int nrow = 0;
  int ncol = 0;
  double looks = 0.0;
};

inline DirHeader read_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file, "cannot open file");
  DirHeader h;
  bool got_nrow = false, got_ncol = false, got_looks = false;
  std::string key;
  while (in >> key) {
    if (key == "Nrow" && (in >> h.nrow)) got_nrow = true;
    else if (key == "Ncol" && (in >> h.ncol)) got_ncol = true;
    else if (key == "Looks" && (in >> h.looks)) got_looks = true;
    else throw ParseError(file, "unrecognized or malformed entry '" + key + "'");
  }
  if (!got_nrow || !got_ncol || !got_looks)
    throw ParseError(file, "missing Nrow, Ncol or Looks entry");
  if (h.nrow <= 0 || h.ncol <= 0)
    throw ParseError(file, "Nrow and Ncol must be positive");
  if (!(h.looks > 0.0))
    throw ParseError(file, "Looks must be positive");
  return h;
}

}  // namespace detail

/// Read the covariance directory format written by write_covariance_dir.
/// Reading what was written returns a bit-identical image for every finite
/// float32 payload.
inline CovarianceImage read_covariance_dir(const std::filesystem::path& dir) {
  const detail::DirHeader h = detail::read_config(dir / "config.txt");
  const std::size_t npx =
      static_cast<std::size_t>(h.nrow) * static_cast<std::size_t>(h.ncol);
  CovarianceImage img(h.ncol, h.nrow, h.looks);
  std::vector<FeatureVector> feats(npx);
  for (int plane = 0; plane < 9; ++plane) {
    const std::filesystem::path file = dir / detail::kPlaneNames[plane];
    if (!std::filesystem::exists(file))
      throw ParseError(file, "missing covariance plane");
    const std::vector<unsigned char> buf = detail::read_file(file);
    if (buf.size() != npx * 4)
      throw ParseError(file, "size mismatch: header implies " +
                                 std::to_string(npx * 4) + " bytes, found " +
                                 std::to_string(buf.size()));
    const int ch = detail::kPlaneChannel[plane];
    for (std::size_t i = 0; i < npx; ++i) {
      const float v = detail::read_f32le(buf.data() + i * 4);
      if (!std::isfinite(v))
        throw ParseError(file, "non-finite value", i * 4);
      feats[i][static_cast<std::size_t>(ch)] = static_cast<double>(v);
    }
  }
  for (std::size_t i = 0; i < npx; ++i)
    img[i] = from_feature_vector(feats[i]);
  return img;
}

/// Write a label plane: row-major unsigned 8-bit, one byte per pixel.
inline void write_labels(const LabelMap& labels,
                         const std::filesystem::path& file) {
  std::filesystem::create_directories(file.parent_path().empty()
                                          ? "."
                                          : file.parent_path());
  detail::write_file(file, labels.data().data(), labels.size());
}

inline LabelMap read_labels(const std::filesystem::path& file, int width,
                            int height) {
  const std::vector<unsigned char> buf = detail::read_file(file);
  LabelMap labels(width, height);
  if (buf.size() != labels.size())
    throw ParseError(file, "size mismatch: expected " +
                               std::to_string(labels.size()) +
                               " bytes, found " + std::to_string(buf.size()));
  for (std::size_t i = 0; i < buf.size(); ++i) labels[i] = buf[i];
  return labels;
}

/// Read a label plane whose dimensions come from a config.txt next to it;
/// `path` may be the labels file itself or the directory containing
/// labels.bin + config.txt.
inline LabelMap read_labels_auto(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  fs::path file = path;
  fs::path config_dir;
  if (fs::is_directory(path)) {
    file = path / "labels.bin";
    config_dir = path;
  } else {
    config_dir = path.parent_path();
  }
  const detail::DirHeader h = detail::read_config(config_dir / "config.txt");
  return read_labels(file, h.ncol, h.nrow);
}

}  // namespace polsar
