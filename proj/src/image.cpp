#include "masfm/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "masfm/error.hpp"

namespace masfm {

namespace {

// Reads one whitespace-delimited PPM header token, skipping '#' comments.
std::string next_header_token(std::istream& stream) {
  std::string token;
  while (stream >> token) {
    if (token[0] == '#') {
      std::string rest;
      std::getline(stream, rest);
      continue;
    }
    return token;
  }
  throw Error(ErrorCode::IoError, "truncated PPM header");
}

unsigned char to_byte(float value) {
  const float clamped = std::clamp(value, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::lround(clamped * 255.0f));
}

}  // namespace

Image load_ppm(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCode::IoError, "cannot open image " + path);
  }
  if (next_header_token(file) != "P6") {
    throw Error(ErrorCode::IoError, "expected binary PPM (P6): " + path);
  }
  const int width = std::stoi(next_header_token(file));
  const int height = std::stoi(next_header_token(file));
  const int maxval = std::stoi(next_header_token(file));
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw Error(ErrorCode::IoError, "unsupported PPM header in " + path);
  }
  file.get();  // single whitespace after maxval

  std::vector<unsigned char> raw(3 * width * height);
  file.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (file.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw Error(ErrorCode::IoError, "truncated PPM payload in " + path);
  }
  Image image(width, height);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    image.data[i] = raw[i] / 255.0f;
  }
  return image;
}

void save_ppm(const Image& image, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCode::IoError, "cannot write image " + path);
  }
  file << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = to_byte(image.data[i]);
  }
  file.write(reinterpret_cast<const char*>(raw.data()), raw.size());
}

void save_pgm(const Mask& mask, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCode::IoError, "cannot write mask " + path);
  }
  file << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<unsigned char> raw(mask.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = mask.data[i] ? 255 : 0;
  }
  file.write(reinterpret_cast<const char*>(raw.data()), raw.size());
}

Eigen::Vector3f rgb_to_hsv(float r, float g, float b) {
  const float maxc = std::max({r, g, b});
  const float minc = std::min({r, g, b});
  const float delta = maxc - minc;
  float h = 0.0f;
  if (delta > 0.0f) {
    if (maxc == r) {
      h = std::fmod((g - b) / delta, 6.0f);
    } else if (maxc == g) {
      h = (b - r) / delta + 2.0f;
    } else {
      h = (r - g) / delta + 4.0f;
    }
    h /= 6.0f;
    if (h < 0.0f) h += 1.0f;
  }
  const float s = maxc > 0.0f ? delta / maxc : 0.0f;
  return {h, s, maxc};
}

std::optional<Eigen::Vector3f> sample_bilinear(const Image& image, double x, double y) {
  if (x < 0.0 || y < 0.0 || x > image.width - 1.0 || y > image.height - 1.0) {
    return std::nullopt;
  }
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const float fx = static_cast<float>(x - x0);
  const float fy = static_cast<float>(y - y0);

  Eigen::Vector3f out;
  for (int c = 0; c < 3; ++c) {
    const float top = image.pixel(x0, y0)[c] * (1.0f - fx) + image.pixel(x1, y0)[c] * fx;
    const float bottom = image.pixel(x0, y1)[c] * (1.0f - fx) + image.pixel(x1, y1)[c] * fx;
    out[c] = top * (1.0f - fy) + bottom * fy;
  }
  return out;
}

std::vector<float> gaussian_blur(const std::vector<float>& field, int width, int height,
                                 int kernel_size, double sigma) {
  const int radius = kernel_size / 2;
  std::vector<double> kernel(kernel_size);
  double sum = 0.0;
  for (int i = 0; i < kernel_size; ++i) {
    const double d = i - radius;
    kernel[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += kernel[i];
  }
  for (double& k : kernel) k /= sum;

  const auto clamp_x = [&](int x) { return std::clamp(x, 0, width - 1); };
  const auto clamp_y = [&](int y) { return std::clamp(y, 0, height - 1); };

  std::vector<float> horizontal(field.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * field[y * width + clamp_x(x + k)];
      }
      horizontal[y * width + x] = static_cast<float>(acc);
    }
  }
  std::vector<float> out(field.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * horizontal[clamp_y(y + k) * width + x];
      }
      out[y * width + x] = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace masfm
