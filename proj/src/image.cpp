#include "rmp/image.hpp"

#include <algorithm>
#include <cmath>

namespace rmp {

double bilinear_sample(const std::vector<double>& grid, int height, int width, double x,
                       double y) {
  x = std::min(std::max(x, 0.0), static_cast<double>(width - 1));
  y = std::min(std::max(y, 0.0), static_cast<double>(height - 1));
  const int x0 = std::min(static_cast<int>(std::floor(x)), width - 2 >= 0 ? width - 2 : 0);
  const int y0 = std::min(static_cast<int>(std::floor(y)), height - 2 >= 0 ? height - 2 : 0);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = grid[static_cast<std::size_t>(y0) * width + x0];
  const double v01 = grid[static_cast<std::size_t>(y0) * width + x1];
  const double v10 = grid[static_cast<std::size_t>(y1) * width + x0];
  const double v11 = grid[static_cast<std::size_t>(y1) * width + x1];
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
}

void sample_field(const DisplacementField& f, double x, double y, double* dx, double* dy) {
  *dx = bilinear_sample(f.dx, f.height, f.width, x, y);
  *dy = bilinear_sample(f.dy, f.height, f.width, x, y);
}

}  // namespace rmp
