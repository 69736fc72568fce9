#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "lq/mesh.hpp"

namespace lq::testing {

inline double signed_volume(const TriMesh& m) {
  double v = 0.0;
  for (const auto& f : m.faces) {
    v += m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]])) / 6.0;
  }
  return v;
}

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lq_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

inline const char* kCubeText =
    "# unit cube\n"
    "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
    "v 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
    "f 1 4 3\nf 1 3 2\n"
    "f 5 6 7\nf 5 7 8\n"
    "f 1 2 6\nf 1 6 5\n"
    "f 2 3 7\nf 2 7 6\n"
    "f 3 4 8\nf 3 8 7\n"
    "f 4 1 5\nf 4 5 8\n";

}  // namespace lq::testing
