#include "mtb/image.hpp"

#include <algorithm>
#include <cmath>

namespace mtb {

void Image::clamp01() {
  for (float& v : pixels) v = std::clamp(v, 0.0f, 1.0f);
}

std::vector<std::uint8_t> Image::quantize() const {
  std::vector<std::uint8_t> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    float v = std::clamp(pixels[i], 0.0f, 1.0f);
    // Round half up, matching the documented on-disk convention.
    out[i] = static_cast<std::uint8_t>(std::floor(v * 255.0f + 0.5f));
  }
  return out;
}

Image Image::dequantize(const std::uint8_t* bytes, int h, int w) {
  Image img(h, w);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<float>(bytes[i]) / 255.0f;
  }
  return img;
}

Image quantize_roundtrip(const Image& img) {
  auto q = img.quantize();
  return Image::dequantize(q.data(), img.height, img.width);
}

bool operator==(const Image& a, const Image& b) {
  return a.height == b.height && a.width == b.width && a.pixels == b.pixels;
}

}  // namespace mtb
