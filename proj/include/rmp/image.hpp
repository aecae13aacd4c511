#ifndef RMP_IMAGE_HPP_
#define RMP_IMAGE_HPP_

#include <vector>

#include "rmp/errors.hpp"
#include "rmp/quantizer.hpp"

namespace rmp {

// Grayscale frame; pixel (x, y) = pix[y * width + x]. Image-space axes:
// x runs along columns, y along rows, both in pixel units.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pix;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pix(static_cast<std::size_t>(h) * w, 0.0) {}

  double& at(int y, int x) { return pix[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return pix[static_cast<std::size_t>(y) * width + x]; }
};

// Bilinear sample with clamp-to-edge boundary handling.
double bilinear_sample(const std::vector<double>& grid, int height, int width, double x, double y);

inline double bilinear_sample(const Image& img, double x, double y) {
  return bilinear_sample(img.pix, img.height, img.width, x, y);
}

// Bilinear sample of both displacement components at a sub-pixel position.
void sample_field(const DisplacementField& f, double x, double y, double* dx, double* dy);

}  // namespace rmp

#endif  // RMP_IMAGE_HPP_
