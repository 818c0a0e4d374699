#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "dseg/core/raster.hpp"

namespace dseg {

/// Tight bounding rectangles of the 4-connected foreground components, in
/// raster-scan order of each component's first pixel.
inline std::vector<PixelBox> component_boxes(const Mask& mask) {
  std::vector<PixelBox> boxes;
  std::vector<char> seen(mask.pixel_count(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) {
      const std::size_t idx = mask.index(r, c);
      if (!mask.data[idx] || seen[idx]) continue;
      PixelBox b{c, r, c + 1, r + 1};
      seen[idx] = 1;
      stack.push_back({r, c});
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        b.x_min = std::min(b.x_min, x);
        b.y_min = std::min(b.y_min, y);
        b.x_max = std::max(b.x_max, x + 1);
        b.y_max = std::max(b.y_max, y + 1);
        constexpr int dy[] = {-1, 1, 0, 0};
        constexpr int dx[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = y + dy[k], nx = x + dx[k];
          if (ny < 0 || nx < 0 || ny >= mask.height || nx >= mask.width) continue;
          const std::size_t n = mask.index(ny, nx);
          if (mask.data[n] && !seen[n]) {
            seen[n] = 1;
            stack.push_back({ny, nx});
          }
        }
      }
      boxes.push_back(b);
    }
  return boxes;
}

}  // namespace dseg
