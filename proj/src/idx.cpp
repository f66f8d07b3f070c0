#include "ilvm/idx.hpp"

#include <fstream>

namespace ilvm {

namespace {

constexpr std::uint32_t kImagesMagic = 2051;
constexpr std::uint32_t kLabelsMagic = 2049;

std::uint32_t read_u32_be(std::istream& in, const std::string& path, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("'" + path + "': truncated while reading " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

IdxData load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream im(images_path, std::ios::binary);
  if (!im) throw IoError("cannot open '" + images_path + "'");
  const auto im_magic = read_u32_be(im, images_path, "magic");
  if (im_magic != kImagesMagic) {
    throw IoError("'" + images_path + "': bad magic " + std::to_string(im_magic) +
                  " (expected " + std::to_string(kImagesMagic) + ")");
  }
  const auto n = read_u32_be(im, images_path, "count");
  const auto rows = read_u32_be(im, images_path, "rows");
  const auto cols = read_u32_be(im, images_path, "cols");
  if (n == 0) throw ContractError("'" + images_path + "': empty bank (0 images)");
  const std::size_t pixel_count = std::size_t(n) * rows * cols;
  std::vector<unsigned char> raw(pixel_count);
  im.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixel_count));
  if (!im) throw IoError("'" + images_path + "': truncated pixel payload");

  std::ifstream lb(labels_path, std::ios::binary);
  if (!lb) throw IoError("cannot open '" + labels_path + "'");
  const auto lb_magic = read_u32_be(lb, labels_path, "magic");
  if (lb_magic != kLabelsMagic) {
    throw IoError("'" + labels_path + "': bad magic " + std::to_string(lb_magic) +
                  " (expected " + std::to_string(kLabelsMagic) + ")");
  }
  const auto n_labels = read_u32_be(lb, labels_path, "count");
  if (n_labels != n) {
    throw IoError("label count " + std::to_string(n_labels) + " does not match image count " +
                  std::to_string(n));
  }
  std::vector<unsigned char> raw_labels(n_labels);
  lb.read(reinterpret_cast<char*>(raw_labels.data()), n_labels);
  if (!lb) throw IoError("'" + labels_path + "': truncated label payload");

  IdxData out;
  out.pixels = TensorValue::zeros({static_cast<std::int64_t>(n),
                                   static_cast<std::int64_t>(rows) * cols});
  for (std::size_t i = 0; i < pixel_count; ++i) {
    out.pixels.data[i] = static_cast<double>(raw[i]) / 255.0;
  }
  out.labels.reserve(n_labels);
  for (auto b : raw_labels) out.labels.push_back(static_cast<int>(b));
  return out;
}

}  // namespace ilvm
