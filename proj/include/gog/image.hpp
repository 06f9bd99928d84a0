#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gog {

/// Axis-aligned box in pixel coordinates, (x0,y0) inclusive top-left, (x1,y1) exclusive bottom-right.
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
  bool operator==(const BBox&) const = default;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  bool operator==(const Image&) const = default;
};

class OutOfBounds : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class UnknownImage : public std::runtime_error {
 public:
  explicit UnknownImage(std::string_view ref) : std::runtime_error("unknown image: " + std::string(ref)) {}
};

/// Deterministic noise image; identical (width, height, seed) give identical pixels.
Image synthetic_image(int width, int height, std::uint64_t seed);

std::string encode_ppm(const Image& image);
std::optional<Image> decode_ppm(std::string_view bytes);

/// Image references are either a registered base id or "<base>@x0,y0,x1,y1",
/// an integer pixel window of the base image. Crops of crops are folded into
/// base coordinates, so every region has exactly one canonical ref.
class ImageStore {
 public:
  void add(std::string id, Image image);
  void add_synthetic(std::string id, int width, int height, std::uint64_t seed);
  /// Loads a binary PPM (P6) file and registers it under id.
  void add_ppm_file(std::string id, const std::string& path);

  bool contains(std::string_view ref) const;
  Image resolve(std::string_view ref) const;
  std::pair<int, int> dimensions(std::string_view ref) const;

  /// Ref for the region of `ref` covered by box (in that image's coordinates).
  /// Fractional edges are widened to whole pixels.
  std::string crop(std::string_view ref, const BBox& box) const;

  std::vector<std::string> base_ids() const;

 private:
  struct Window {
    std::string base;
    int x0, y0, x1, y1;
  };
  Window window_of(std::string_view ref) const;

  mutable std::mutex mutex_;
  std::map<std::string, Image, std::less<>> bases_;
};

}  // namespace gog
