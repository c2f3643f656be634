#pragma once

// Brute-force references for the cell metrics. Cell (x, y) is the unit square
// [x-1, x] x [y-1, y].

#include <algorithm>
#include <cmath>

namespace oracle {

inline double corner_max(int x1, int y1, int x2, int y2, double scale) {
  double best = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double ax = x1 - 1 + (i & 1), ay = y1 - 1 + (i >> 1);
      const double bx = x2 - 1 + (j & 1), by = y2 - 1 + (j >> 1);
      best = std::max(best, std::sqrt((ax - bx) * (ax - bx) + (ay - by) * (ay - by)));
    }
  return best * scale;
}

inline double rect_min(int x1, int y1, int x2, int y2, double scale) {
  const double gx = std::max({0.0, double(x2 - 1) - x1, double(x1 - 1) - x2});
  const double gy = std::max({0.0, double(y2 - 1) - y1, double(y1 - 1) - y2});
  return std::sqrt(gx * gx + gy * gy) * scale;
}

/// Minimum over an n x n lattice of sample points in each cell (boundaries included).
inline double sampled_min(int x1, int y1, int x2, int y2, double scale, int n = 40) {
  double best = 1e300;
  for (int a = 0; a <= n; ++a)
    for (int b = 0; b <= n; ++b)
      for (int c = 0; c <= n; ++c)
        for (int d = 0; d <= n; ++d) {
          const double ax = x1 - 1 + double(a) / n, ay = y1 - 1 + double(b) / n;
          const double bx = x2 - 1 + double(c) / n, by = y2 - 1 + double(d) / n;
          best = std::min(best, std::hypot(ax - bx, ay - by));
        }
  return best * scale;
}

inline double centroid(int x1, int y1, int x2, int y2, double scale) {
  return std::hypot((x1 - 0.5) - (x2 - 0.5), (y1 - 0.5) - (y2 - 0.5)) * scale;
}

}  // namespace oracle
