#include "evicore/array_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace evicore {
namespace {

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("array file truncated");
  return to_little_endian(v);
}

}  // namespace

void write_image_stack(const std::filesystem::path& path, const std::vector<Image>& images) {
  const int h = images.empty() ? 0 : images.front().rows();
  const int w = images.empty() ? 0 : images.front().cols();
  for (const auto& img : images)
    if (img.rows() != h || img.cols() != w)
      throw std::invalid_argument("write_image_stack: images differ in shape");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  put<std::int32_t>(out, static_cast<std::int32_t>(images.size()));
  put<std::int32_t>(out, h);
  put<std::int32_t>(out, w);
  for (const auto& img : images)
    for (float v : img.values()) put<float>(out, v);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ImageStack read_image_stack(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto n = get<std::int32_t>(in);
  const auto h = get<std::int32_t>(in);
  const auto w = get<std::int32_t>(in);
  if (n < 0 || h < 0 || w < 0) throw std::runtime_error("corrupt array header in " + path.string());

  ImageStack stack;
  stack.height = h;
  stack.width = w;
  stack.images.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Image img(h, w);
    for (float& v : img.values()) v = get<float>(in);
    stack.images.push_back(std::move(img));
  }
  return stack;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  write_image_stack(path, {image});
}

Image read_image(const std::filesystem::path& path) {
  auto stack = read_image_stack(path);
  if (stack.images.size() != 1)
    throw std::runtime_error(path.string() + ": expected exactly one array");
  return std::move(stack.images.front());
}

}  // namespace evicore
