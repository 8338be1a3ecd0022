#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wheatdet
{

/// 8-bit, 3-channel interleaved pixel grid (row-major, RGB).
class Image
{
public:
  static constexpr int channels = 3;

  Image() = default;
  Image(int width, int height, std::uint8_t fill = 0)
  : width_(width), height_(height),
    data_(static_cast<std::size_t>(width) * height * channels, fill)
  {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("image dimensions must be positive");
    }
  }

  int width() const noexcept {return width_;}
  int height() const noexcept {return height_;}
  bool empty() const noexcept {return data_.empty();}

  std::uint8_t& at(int x, int y, int c)
  {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const
  {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels + c];
  }

  std::span<std::uint8_t> pixels() noexcept {return data_;}
  std::span<const std::uint8_t> pixels() const noexcept {return data_;}

  bool operator==(const Image&) const = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

inline std::uint8_t clamp_u8(double v) noexcept
{
  if (!(v > 0.0)) {
    return 0;
  }
  if (v >= 255.0) {
    return 255;
  }
  return static_cast<std::uint8_t>(v + 0.5);
}

/// Binary PPM (P6, maxval 255).
inline Image read_ppm(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open image '" + path + "'");
  }
  auto next_token = [&in]() {
      std::string tok;
      char c;
      while (in.get(c)) {
        if (c == '#') {
          std::string skip;
          std::getline(in, skip);
          continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
          if (!tok.empty()) {
            break;
          }
          continue;
        }
        tok.push_back(c);
      }
      return tok;
    };
  if (next_token() != "P6") {
    throw std::runtime_error("'" + path + "' is not a binary PPM");
  }
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  if (std::stoi(next_token()) != 255) {
    throw std::runtime_error("'" + path + "' must have maxval 255");
  }
  Image img(w, h);
  auto px = img.pixels();
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (in.gcount() != static_cast<std::streamsize>(px.size())) {
    throw std::runtime_error("'" + path + "' is truncated");
  }
  return img;
}

inline void write_ppm(const std::string& path, const Image& img)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write image '" + path + "'");
  }
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  auto px = img.pixels();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace wheatdet
