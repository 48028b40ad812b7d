#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "polsar/io.hpp"

namespace polsar {

enum class RegionRole { train, test };

inline const char* to_string(RegionRole r) {
  return r == RegionRole::train ? "train" : "test";
}

/// Axis-aligned rectangle with inclusive corners, origin top-left.
struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(int x, int y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
  bool intersects(const Rect& o) const {
    return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1;
  }
  long long pixel_count() const {
    return static_cast<long long>(x1 - x0 + 1) * (y1 - y0 + 1);
  }
};

struct RegionEntry {
  RegionRole role = RegionRole::train;
  int class_id = 0;
  std::string class_name;
  Rect rect;
  int line = 0;  // 1-based line in the source file, for diagnostics
};

struct ClassInfo {
  int id = 0;
  std::string name;
};

/// Named training/testing rectangles per class, validated against a raster:
/// every rectangle in bounds, consistent names per id, and no pixel shared
/// between roles or between classes within a role. Overlapping rectangles of
/// the same (class, role) are allowed; pixel enumeration deduplicates them.
class RegionSet {
 public:
  RegionSet() = default;

  RegionSet(std::vector<RegionEntry> entries, int width, int height)
      : entries_(std::move(entries)), width_(width), height_(height) {
    validate();
  }

  static RegionSet parse(std::istream& in, const std::filesystem::path& path,
                         int width, int height) {
    std::vector<RegionEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string role_s;
      if (!(ls >> role_s)) continue;  // blank line
      RegionEntry e;
      e.line = lineno;
      if (role_s == "train") e.role = RegionRole::train;
      else if (role_s == "test") e.role = RegionRole::test;
      else
        throw ParseError(path, "line " + std::to_string(lineno) +
                                   ": role must be 'train' or 'test', got '" +
                                   role_s + "'");
      if (!(ls >> e.class_id >> e.class_name >> e.rect.x0 >> e.rect.y0 >>
            e.rect.x1 >> e.rect.y1))
        throw ParseError(path, "line " + std::to_string(lineno) +
                                   ": expected <role> <class_id> <class_name> "
                                   "<x0> <y0> <x1> <y1>");
      std::string extra;
      if (ls >> extra)
        throw ParseError(path, "line " + std::to_string(lineno) +
                                   ": trailing token '" + extra + "'");
      entries.push_back(std::move(e));
    }
    return RegionSet(std::move(entries), width, height);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<RegionEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  /// Declared classes, ascending by id.
  std::vector<ClassInfo> classes() const {
    std::map<int, std::string> byid;
    for (const auto& e : entries_) byid.emplace(e.class_id, e.class_name);
    std::vector<ClassInfo> out;
    out.reserve(byid.size());
    for (const auto& [id, name] : byid) out.push_back({id, name});
    return out;
  }

  /// Deduplicated pixels of one class and role, row-major order.
  std::vector<std::pair<int, int>> pixels(int class_id, RegionRole role) const {
    std::vector<std::pair<int, int>> px;  // (y, x) for row-major sort
    for (const auto& e : entries_) {
      if (e.class_id != class_id || e.role != role) continue;
      for (int y = e.rect.y0; y <= e.rect.y1; ++y)
        for (int x = e.rect.x0; x <= e.rect.x1; ++x) px.emplace_back(y, x);
    }
    std::sort(px.begin(), px.end());
    px.erase(std::unique(px.begin(), px.end()), px.end());
    std::vector<std::pair<int, int>> out;
    out.reserve(px.size());
    for (const auto& [y, x] : px) out.emplace_back(x, y);
    return out;
  }

  long long count(int class_id, RegionRole role) const {
    return static_cast<long long>(pixels(class_id, role).size());
  }

 private:
  void validate() const {
    std::map<int, std::string> names;
    for (const auto& e : entries_) {
      if (e.class_id < 1 || e.class_id > 255)
        throw ValidationError("region line " + std::to_string(e.line) +
                              ": class id " + std::to_string(e.class_id) +
                              " outside 1..255");
      const Rect& r = e.rect;
      if (r.x0 < 0 || r.y0 < 0 || r.x0 > r.x1 || r.y0 > r.y1 ||
          r.x1 >= width_ || r.y1 >= height_)
        throw ValidationError(
            "region line " + std::to_string(e.line) + ": rectangle [" +
            std::to_string(r.x0) + "," + std::to_string(r.y0) + "," +
            std::to_string(r.x1) + "," + std::to_string(r.y1) +
            "] not inside a " + std::to_string(width_) + "x" +
            std::to_string(height_) + " raster");
      auto [it, inserted] = names.emplace(e.class_id, e.class_name);
      if (!inserted && it->second != e.class_name)
        throw ValidationError("class id " + std::to_string(e.class_id) +
                              " declared with conflicting names '" +
                              it->second + "' and '" + e.class_name + "'");
    }
    // Pairwise rectangle intersections: forbid any train/test sharing and any
    // cross-class sharing within a role.
    std::vector<std::string> overlaps;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      for (std::size_t j = i + 1; j < entries_.size(); ++j) {
        const RegionEntry& a = entries_[i];
        const RegionEntry& b = entries_[j];
        if (!a.rect.intersects(b.rect)) continue;
        const bool same_role = a.role == b.role;
        const bool same_class = a.class_id == b.class_id;
        if (same_role && same_class) continue;
        std::ostringstream os;
        os << "line " << a.line << " (" << to_string(a.role) << " class "
           << a.class_id << ") overlaps line " << b.line << " ("
           << to_string(b.role) << " class " << b.class_id << ")";
        overlaps.push_back(os.str());
      }
    }
    if (!overlaps.empty()) {
      std::ostringstream os;
      os << "overlapping regions:";
      for (const auto& s : overlaps) os << "\n  " << s;
      throw ValidationError(os.str());
    }
  }

  std::vector<RegionEntry> entries_;
  int width_ = 0;
  int height_ = 0;
};

/// Parse a region file: one rectangle per line,
/// `<role> <class_id> <class_name> <x0> <y0> <x1> <y1>` (inclusive, origin
/// top-left). '#' starts a comment. An empty file is a valid empty set.
inline RegionSet read_regions(const std::filesystem::path& path, int width,
                              int height) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  return RegionSet::parse(in, path, width, height);
}

inline void write_regions(const RegionSet& rs,
                          const std::filesystem::path& path) {
  std::ostringstream os;
  for (const auto& e : rs.entries())
    os << to_string(e.role) << ' ' << e.class_id << ' ' << e.class_name << ' '
       << e.rect.x0 << ' ' << e.rect.y0 << ' ' << e.rect.x1 << ' ' << e.rect.y1
       << '\n';
  const std::string s = os.str();
  detail::write_file(path, s.data(), s.size());
}

}  // namespace polsar
