#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace masfm {

// RGB image with float channels in [0, 1], row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 floats per pixel

  Image() = default;
  Image(int w, int h, float fill = 0.0f) : width(w), height(h), data(3 * w * h, fill) {}

  float* pixel(int x, int y) { return data.data() + 3 * (y * width + x); }
  const float* pixel(int x, int y) const { return data.data() + 3 * (y * width + x); }
};

// Binary mask, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> data;

  Mask() = default;
  Mask(int w, int h, unsigned char fill = 0) : width(w), height(h), data(w * h, fill) {}

  unsigned char& at(int x, int y) { return data[y * width + x]; }
  unsigned char at(int x, int y) const { return data[y * width + x]; }
};

// 8-bit binary PPM (P6).
Image load_ppm(const std::string& path);
void save_ppm(const Image& image, const std::string& path);
// 8-bit binary PGM (P5); nonzero mask values map to 255.
void save_pgm(const Mask& mask, const std::string& path);

// Standard hexcone RGB -> HSV, all channels in [0, 1].
Eigen::Vector3f rgb_to_hsv(float r, float g, float b);

// Bilinear sample; empty when the sample square leaves the image.
std::optional<Eigen::Vector3f> sample_bilinear(const Image& image, double x, double y);

// Separable Gaussian blur on a scalar field, replicated borders.
std::vector<float> gaussian_blur(const std::vector<float>& field, int width, int height,
                                 int kernel_size = 5, double sigma = 1.0);

}  // namespace masfm
