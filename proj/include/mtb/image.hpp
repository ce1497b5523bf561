#pragma once

#include <cstdint>
#include <vector>

namespace mtb {

// 3-channel image, channel-planar (C,H,W) float pixels in [0,1]. The planar
// layout matches both the CIFAR-10 record format and the network input.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // size 3*height*width

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(3) * h * w, 0.0f) {}

  static constexpr int kChannels = 3;

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return pixels.size(); }

  float& at(int c, int y, int x) { return pixels[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const {
    return pixels[c * plane() + static_cast<std::size_t>(y) * width + x];
  }

  void clamp01();

  // Round-half-up quantization to the canonical 8-bit on-disk form.
  std::vector<std::uint8_t> quantize() const;
  static Image dequantize(const std::uint8_t* bytes, int h, int w);
};

// Quantize then dequantize; the canonical value an image settles to on save.
Image quantize_roundtrip(const Image& img);

bool operator==(const Image& a, const Image& b);

// One (x, y) pair: an image plus its class label.
struct ImageSample {
  Image image;
  int label = 0;
};

}  // namespace mtb
