#ifndef CSPROXY_DATASET_HPP
#define CSPROXY_DATASET_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace csproxy {

/// A labeled grayscale image collection. Pixels are in [0, 1] (raw IDX bytes
/// divided by 255); all images share the same height and width.
struct ImageSet {
  std::vector<Eigen::MatrixXd> images;
  std::vector<int> labels;
  int height = 0;
  int width = 0;
  std::string source;        // "<images_path>;<labels_path>" when file-backed
  std::uint64_t checksum = 0;  // FNV-1a over the raw bytes of both files

  std::size_t size() const { return images.size(); }
};

/// Reads an IDX image/label file pair (big-endian magics 0x00000803 and
/// 0x00000801). Throws FormatError on a bad magic, ConsistencyError when the
/// two counts disagree, IoError on missing/truncated files.
ImageSet load_idx(const std::string& images_path,
                  const std::string& labels_path);

/// Writes the set back to a well-formed IDX pair. Pixel bytes round-trip
/// exactly for sets produced by load_idx or from byte-quantized sources.
void save_idx(const ImageSet& set, const std::string& images_path,
              const std::string& labels_path);

/// Contiguous split: first train_count images, then the following test_count.
std::pair<ImageSet, ImageSet> split(const ImageSet& set,
                                    std::size_t train_count,
                                    std::size_t test_count);

/// n images drawn uniformly without replacement; deterministic per seed.
ImageSet subsample(const ImageSet& set, std::size_t n, std::uint64_t seed);

/// The row selection subsample() applies, exposed so index-aligned sidecar
/// data (external feature files) can be subsampled identically.
std::vector<std::size_t> subsample_indices(std::size_t population,
                                           std::size_t n, std::uint64_t seed);

/// Gathers set rows by index (no bounds re-check beyond the vector's).
ImageSet take(const ImageSet& set, const std::vector<std::size_t>& indices);

}  // namespace csproxy

#endif
