#include "csproxy/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csproxy/errors.hpp"
#include "csproxy/rng.hpp"

namespace csproxy {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;  // ubyte, 3 dimensions
constexpr std::uint32_t kLabelsMagic = 0x00000801;  // ubyte, 1 dimension

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off,
                        const std::string& path) {
  if (off + 4 > b.size()) throw IoError("truncated IDX file: " + path);
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(bytes, 4);
}

}  // namespace

ImageSet load_idx(const std::string& images_path,
                  const std::string& labels_path) {
  const auto img_bytes = read_all(images_path);
  const auto lab_bytes = read_all(labels_path);

  const std::uint32_t img_magic = read_be32(img_bytes, 0, images_path);
  if (img_magic != kImagesMagic) {
    std::ostringstream msg;
    msg << images_path << ": bad IDX image magic 0x" << std::hex << img_magic;
    throw FormatError(msg.str());
  }
  const std::uint32_t lab_magic = read_be32(lab_bytes, 0, labels_path);
  if (lab_magic != kLabelsMagic) {
    std::ostringstream msg;
    msg << labels_path << ": bad IDX label magic 0x" << std::hex << lab_magic;
    throw FormatError(msg.str());
  }

  const std::uint32_t n_images = read_be32(img_bytes, 4, images_path);
  const std::uint32_t rows = read_be32(img_bytes, 8, images_path);
  const std::uint32_t cols = read_be32(img_bytes, 12, images_path);
  const std::uint32_t n_labels = read_be32(lab_bytes, 4, labels_path);
  if (n_images != n_labels)
    throw ConsistencyError("image/label count mismatch: " +
                           std::to_string(n_images) + " images vs " +
                           std::to_string(n_labels) + " labels");

  const std::size_t pixel_count =
      std::size_t(n_images) * rows * cols;
  if (img_bytes.size() < 16 + pixel_count)
    throw IoError("truncated IDX file: " + images_path);
  if (lab_bytes.size() < 8 + n_labels)
    throw IoError("truncated IDX file: " + labels_path);

  ImageSet set;
  set.height = static_cast<int>(rows);
  set.width = static_cast<int>(cols);
  set.source = images_path + ";" + labels_path;
  set.checksum = rng::fnv1a(
      std::string_view(reinterpret_cast<const char*>(lab_bytes.data()),
                       lab_bytes.size()),
      rng::fnv1a(std::string_view(
          reinterpret_cast<const char*>(img_bytes.data()), img_bytes.size())));

  set.images.reserve(n_images);
  set.labels.reserve(n_images);
  std::size_t off = 16;
  for (std::uint32_t i = 0; i < n_images; ++i) {
    Eigen::MatrixXd img(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c)
        img(r, c) = img_bytes[off++] / 255.0;
    set.images.push_back(std::move(img));
    set.labels.push_back(lab_bytes[8 + i]);
  }
  return set;
}

void save_idx(const ImageSet& set, const std::string& images_path,
              const std::string& labels_path) {
  std::ofstream img_out(images_path, std::ios::binary);
  if (!img_out) throw IoError("cannot write " + images_path);
  write_be32(img_out, kImagesMagic);
  write_be32(img_out, static_cast<std::uint32_t>(set.size()));
  write_be32(img_out, static_cast<std::uint32_t>(set.height));
  write_be32(img_out, static_cast<std::uint32_t>(set.width));
  for (const auto& img : set.images)
    for (int r = 0; r < set.height; ++r)
      for (int c = 0; c < set.width; ++c) {
        const double p = img(r, c);
        img_out.put(static_cast<char>(
            static_cast<std::uint8_t>(std::lround(p * 255.0))));
      }
  if (!img_out) throw IoError("write failed: " + images_path);

  std::ofstream lab_out(labels_path, std::ios::binary);
  if (!lab_out) throw IoError("cannot write " + labels_path);
  write_be32(lab_out, kLabelsMagic);
  write_be32(lab_out, static_cast<std::uint32_t>(set.size()));
  for (int label : set.labels)
    lab_out.put(static_cast<char>(static_cast<std::uint8_t>(label)));
  if (!lab_out) throw IoError("write failed: " + labels_path);
}

std::pair<ImageSet, ImageSet> split(const ImageSet& set,
                                    std::size_t train_count,
                                    std::size_t test_count) {
  if (train_count + test_count > set.size())
    throw ArgumentError("split: requested " +
                        std::to_string(train_count + test_count) +
                        " images from a set of " + std::to_string(set.size()));
  ImageSet train, test;
  train.height = test.height = set.height;
  train.width = test.width = set.width;
  train.source = test.source = set.source;
  train.checksum = test.checksum = set.checksum;
  train.images.assign(set.images.begin(), set.images.begin() + train_count);
  train.labels.assign(set.labels.begin(), set.labels.begin() + train_count);
  test.images.assign(set.images.begin() + train_count,
                     set.images.begin() + train_count + test_count);
  test.labels.assign(set.labels.begin() + train_count,
                     set.labels.begin() + train_count + test_count);
  return {std::move(train), std::move(test)};
}

std::vector<std::size_t> subsample_indices(std::size_t population,
                                           std::size_t n, std::uint64_t seed) {
  if (n > population)
    throw ArgumentError("subsample: n=" + std::to_string(n) +
                        " exceeds population " + std::to_string(population));
  return rng::sample_indices(population, n, seed);
}

ImageSet take(const ImageSet& set, const std::vector<std::size_t>& indices) {
  ImageSet out;
  out.height = set.height;
  out.width = set.width;
  out.source = set.source;
  out.checksum = set.checksum;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(set.images.at(i));
    out.labels.push_back(set.labels.at(i));
  }
  return out;
}

ImageSet subsample(const ImageSet& set, std::size_t n, std::uint64_t seed) {
  return take(set, subsample_indices(set.size(), n, seed));
}

}  // namespace csproxy
