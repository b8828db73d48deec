#include "idx.hpp"

#include <cstdint>

#include "errors.hpp"
#include "textio.hpp"

namespace viper::ingest {

namespace {

uint32_t read_be32(const std::string& bytes, size_t offset,
                   const std::string& file) {
  if (offset + 4 > bytes.size())
    throw FormatError(file + ": truncated at byte offset " +
                      std::to_string(offset));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

}  // namespace

std::shared_ptr<const ImageStore> load_idx(const std::string& images_path,
                                           const std::string& labels_path) {
  const std::string img = textio::read_file(images_path);
  const std::string lbl = textio::read_file(labels_path);

  if (read_be32(img, 0, images_path) != 0x00000803u)
    throw FormatError(images_path + ": bad magic at byte offset 0, want 0x00000803");
  if (read_be32(lbl, 0, labels_path) != 0x00000801u)
    throw FormatError(labels_path + ": bad magic at byte offset 0, want 0x00000801");

  const uint32_t n_img = read_be32(img, 4, images_path);
  const uint32_t rows = read_be32(img, 8, images_path);
  const uint32_t cols = read_be32(img, 12, images_path);
  const uint32_t n_lbl = read_be32(lbl, 4, labels_path);

  if (n_img != n_lbl)
    throw FormatError(images_path + ": image count " + std::to_string(n_img) +
                      " does not match label count " + std::to_string(n_lbl) +
                      " in " + labels_path);

  const size_t pix = size_t(rows) * cols;
  const size_t want_img = 16 + size_t(n_img) * pix;
  if (img.size() < want_img)
    throw FormatError(images_path + ": truncated at byte offset " +
                      std::to_string(img.size()) + ", want " +
                      std::to_string(want_img) + " bytes");
  const size_t want_lbl = 8 + size_t(n_lbl);
  if (lbl.size() < want_lbl)
    throw FormatError(labels_path + ": truncated at byte offset " +
                      std::to_string(lbl.size()) + ", want " +
                      std::to_string(want_lbl) + " bytes");

  auto store = std::make_shared<ImageStore>();
  store->images.resize(n_img, pix);
  store->labels.resize(n_img);

  const auto* ip = reinterpret_cast<const unsigned char*>(img.data()) + 16;
  for (uint32_t i = 0; i < n_img; ++i) {
    double norm2 = 0.0;
    for (size_t j = 0; j < pix; ++j) {
      const double v = double(ip[size_t(i) * pix + j]) / 255.0;
      store->images(i, j) = v;
      norm2 += v * v;
    }
    if (norm2 > 0.0) store->images.row(i) /= std::sqrt(norm2);
  }

  const auto* lp = reinterpret_cast<const unsigned char*>(lbl.data()) + 8;
  for (uint32_t i = 0; i < n_lbl; ++i) {
    const int v = int(lp[i]);
    if (v > 9)
      throw FormatError(labels_path + ": label " + std::to_string(v) +
                        " out of range at byte offset " +
                        std::to_string(8 + i));
    store->labels[i] = v;
  }

  store->source_digest = textio::sha256_hex(img + lbl);
  return store;
}

}  // namespace viper::ingest
