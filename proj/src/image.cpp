#include "gog/image.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace gog {

Image synthetic_image(int width, int height, std::uint64_t seed) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  Image img{width, height, {}};
  img.rgb.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  std::mt19937_64 engine(seed);
  for (std::size_t i = 0; i < img.rgb.size(); i += 8) {
    auto word = engine();
    for (std::size_t b = 0; b < 8 && i + b < img.rgb.size(); ++b) img.rgb[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
  }
  return img;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.rgb.begin(), image.rgb.end());
  return out;
}

std::optional<Image> decode_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::optional<int> {
    skip_space();
    int value = 0;
    auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
    if (ec != std::errc()) return std::nullopt;
    pos = static_cast<std::size_t>(ptr - bytes.data());
    return value;
  };
  if (bytes.substr(0, 2) != "P6") return std::nullopt;
  pos = 2;
  auto w = read_int();
  auto h = read_int();
  auto maxval = read_int();
  if (!w || !h || !maxval || *w <= 0 || *h <= 0 || *maxval != 255) return std::nullopt;
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) return std::nullopt;
  ++pos;
  const auto need = static_cast<std::size_t>(*w) * static_cast<std::size_t>(*h) * 3;
  if (bytes.size() - pos != need) return std::nullopt;
  Image img{*w, *h, {}};
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void ImageStore::add(std::string id, Image image) {
  if (id.find('@') != std::string::npos) throw std::invalid_argument("image id must not contain '@'");
  std::lock_guard lock(mutex_);
  bases_.insert_or_assign(std::move(id), std::move(image));
}

void ImageStore::add_synthetic(std::string id, int width, int height, std::uint64_t seed) {
  add(std::move(id), synthetic_image(width, height, seed));
}

void ImageStore::add_ppm_file(std::string id, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnknownImage(path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto img = decode_ppm(bytes);
  if (!img) throw std::runtime_error("not a binary PPM image: " + path);
  add(std::move(id), std::move(*img));
}

ImageStore::Window ImageStore::window_of(std::string_view ref) const {
  const auto at = ref.find('@');
  const auto base = ref.substr(0, at);
  std::lock_guard lock(mutex_);
  auto it = bases_.find(base);
  if (it == bases_.end()) throw UnknownImage(ref);
  Window w{std::string(base), 0, 0, it->second.width, it->second.height};
  if (at == std::string_view::npos) return w;

  int v[4];
  std::size_t pos = at + 1;
  for (int i = 0; i < 4; ++i) {
    auto [ptr, ec] = std::from_chars(ref.data() + pos, ref.data() + ref.size(), v[i]);
    if (ec != std::errc()) throw UnknownImage(ref);
    pos = static_cast<std::size_t>(ptr - ref.data());
    if (i < 3) {
      if (pos >= ref.size() || ref[pos] != ',') throw UnknownImage(ref);
      ++pos;
    }
  }
  if (pos != ref.size() || v[0] < 0 || v[1] < 0 || v[2] > w.x1 || v[3] > w.y1 || v[0] >= v[2] || v[1] >= v[3])
    throw UnknownImage(ref);
  return {w.base, v[0], v[1], v[2], v[3]};
}

bool ImageStore::contains(std::string_view ref) const {
  try {
    window_of(ref);
    return true;
  } catch (const UnknownImage&) {
    return false;
  }
}

std::pair<int, int> ImageStore::dimensions(std::string_view ref) const {
  auto w = window_of(ref);
  return {w.x1 - w.x0, w.y1 - w.y0};
}

Image ImageStore::resolve(std::string_view ref) const {
  auto w = window_of(ref);
  std::lock_guard lock(mutex_);
  const Image& base = bases_.find(w.base)->second;
  if (w.x0 == 0 && w.y0 == 0 && w.x1 == base.width && w.y1 == base.height) return base;
  Image out{w.x1 - w.x0, w.y1 - w.y0, {}};
  out.rgb.reserve(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height) * 3);
  for (int y = w.y0; y < w.y1; ++y) {
    auto row = base.rgb.begin() + (static_cast<std::ptrdiff_t>(y) * base.width + w.x0) * 3;
    out.rgb.insert(out.rgb.end(), row, row + static_cast<std::ptrdiff_t>(out.width) * 3);
  }
  return out;
}

std::string ImageStore::crop(std::string_view ref, const BBox& box) const {
  auto w = window_of(ref);
  const int width = w.x1 - w.x0;
  const int height = w.y1 - w.y0;
  if (!(box.x0 >= 0 && box.y0 >= 0 && box.x1 <= width && box.y1 <= height && box.x0 < box.x1 && box.y0 < box.y1)) {
    std::ostringstream msg;
    msg << "crop box (" << box.x0 << "," << box.y0 << "," << box.x1 << "," << box.y1 << ") outside " << width << "x"
        << height << " image " << ref;
    throw OutOfBounds(msg.str());
  }
  const int x0 = w.x0 + static_cast<int>(std::floor(box.x0));
  const int y0 = w.y0 + static_cast<int>(std::floor(box.y0));
  const int x1 = w.x0 + static_cast<int>(std::ceil(box.x1));
  const int y1 = w.y0 + static_cast<int>(std::ceil(box.y1));
  return w.base + "@" + std::to_string(x0) + "," + std::to_string(y0) + "," + std::to_string(x1) + "," +
         std::to_string(y1);
}

std::vector<std::string> ImageStore::base_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : bases_) out.push_back(id);
  return out;
}

}  // namespace gog
