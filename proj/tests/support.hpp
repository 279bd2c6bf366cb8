#pragma once

// Shared helpers for unit and acceptance tests: scratch directories, random
// generators and oracles written independently of the library code.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kdseg/image.hpp"
#include "kdseg/rng.hpp"

namespace kdseg::testing {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "kdseg") {
    static std::uint64_t counter = 0;
    Rng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)) ^ reinterpret_cast<std::uintptr_t>(this) ^
            ++counter);
    path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(rng() % 1000000000ull));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline BinaryMask random_mask(Rng& rng, int h, int w, double density) {
  BinaryMask m("m", h, w);
  for (auto& v : m.pixels) v = uniform01(rng) < density ? 1 : 0;
  return m;
}

inline ImagePatch random_patch(Rng& rng, int h, int w, int c) {
  ImagePatch p("p", h, w, c);
  for (auto& v : p.pixels) v = static_cast<float>(uniform01(rng));
  return p;
}

/// Central finite difference of f at x along every coordinate.
inline std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                             std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// Hausdorff oracle: boundary pixels by direct neighbour inspection, then the
/// all-pairs maximum of nearest distances.
inline double brute_force_hausdorff(const BinaryMask& a, const BinaryMask& b) {
  auto border = [](const BinaryMask& m) {
    std::vector<std::pair<int, int>> pts;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        if (!m.at(y, x)) continue;
        const int dy[] = {-1, 1, 0, 0};
        const int dx[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int yy = y + dy[k];
          const int xx = x + dx[k];
          if (yy < 0 || xx < 0 || yy >= m.height || xx >= m.width || !m.at(yy, xx)) {
            pts.emplace_back(y, x);
            break;
          }
        }
      }
    }
    return pts;
  };
  const auto pa = border(a);
  const auto pb = border(b);
  auto directed = [](const auto& from, const auto& to) {
    double worst = 0.0;
    for (auto [y0, x0] : from) {
      double best = std::numeric_limits<double>::infinity();
      for (auto [y1, x1] : to) best = std::min(best, std::hypot(double(y0 - y1), double(x0 - x1)));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

/// Mann-Whitney oracle by subset enumeration: every way of choosing which
/// n_a pooled values belong to sample a (bitmask search), midranks by direct
/// counting. Returns {u_a, two-sided p}.
inline std::pair<double, double> enumerate_mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const int n = static_cast<int>(pooled.size());
  std::vector<double> rank(n);
  for (int i = 0; i < n; ++i) {
    int less = 0;
    int equal = 0;
    for (int j = 0; j < n; ++j) {
      less += pooled[j] < pooled[i];
      equal += pooled[j] == pooled[i];
    }
    rank[i] = less + (equal + 1) / 2.0;
  }
  const int na = static_cast<int>(a.size());
  auto u_of = [&](std::uint32_t subset) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      if (subset >> i & 1u) s += rank[i];
    }
    return s - na * (na + 1) / 2.0;
  };
  const double observed = u_of((1u << na) - 1u);
  double lower = 0.0;
  double upper = 0.0;
  double total = 0.0;
  for (std::uint32_t subset = 0; subset < (1u << n); ++subset) {
    if (std::popcount(subset) != na) continue;
    const double u = u_of(subset);
    total += 1.0;
    if (u <= observed + 1e-9) lower += 1.0;
    if (u >= observed - 1e-9) upper += 1.0;
  }
  return {observed, std::min(1.0, 2.0 * std::min(lower, upper) / total)};
}

}  // namespace kdseg::testing
