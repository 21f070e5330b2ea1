#ifndef CSPROXY_DESCRIPTOR_HPP
#define CSPROXY_DESCRIPTOR_HPP

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csproxy/bitvec.hpp"

namespace csproxy {

enum class EnergyLevel { E90, E95, E100 };

double energy_fraction(EnergyLevel level);
std::string to_string(EnergyLevel level);
EnergyLevel parse_energy_level(const std::string& name);

/// Block sizes and per-scale AC coefficient budgets for the multi-scale
/// binary DCT descriptor. Budgets count zig-zag-ordered AC coefficients;
/// the DC term is always excluded.
struct ScaleConfig {
  std::vector<int> block_sizes{8, 12, 16, 24};
  std::vector<int> coeff_counts;
  EnergyLevel energy = EnergyLevel::E100;

  /// Stock budgets: E90 {15,26,37,73}, E95 {21,40,63,130},
  /// E100 keeps all b^2-1 AC coefficients per scale.
  static ScaleConfig preset(EnergyLevel level);

  int total_bits() const;
  /// Per-scale (offset, length) segments of the concatenated descriptor.
  std::vector<std::pair<int, int>> layout() const;
  void validate() const;

  bool operator==(const ScaleConfig&) const = default;
};

/// Orthonormal type-II DCT basis for size b (cached per thread).
const Eigen::MatrixXd& dct_basis(int b);

/// Orthonormal 2D type-II DCT of a square block; idct2 inverts it.
Eigen::MatrixXd dct2(const Eigen::MatrixXd& block);
Eigen::MatrixXd idct2(const Eigen::MatrixXd& coeffs);

/// JPEG-style zig-zag traversal of a b x b grid as (row, col) pairs,
/// starting at (0,0). Cached per thread.
const std::vector<std::pair<int, int>>& zigzag_order(int b);

/// b x b window whose top-left is (row - b/2, col - b/2); out-of-range
/// pixels replicate the nearest edge pixel.
Eigen::MatrixXd extract_block(const Eigen::MatrixXd& image, int row, int col,
                              int b);

struct KeypointGrid {
  int stride = 2;
  std::vector<std::pair<int, int>> points;  // row-major order

  static KeypointGrid regular(int height, int width, int stride);
};

struct BinaryDescriptor {
  BitVec bits;
  int row = 0;
  int col = 0;
};

/// One multi-scale binary descriptor: per scale, the first coeff_counts[i]
/// zig-zag AC coefficients of the block DCT, binarized against their own
/// arithmetic mean (bit = 1 iff coefficient > mean), scales concatenated in
/// block-size order.
BinaryDescriptor describe_point(const Eigen::MatrixXd& image, int row, int col,
                                const ScaleConfig& cfg);

/// describe_point at every grid point, row-major; one descriptor per row.
BitMatrix describe_dense(const Eigen::MatrixXd& image, const KeypointGrid& grid,
                         const ScaleConfig& cfg);

/// Dense descriptors for a whole image collection; row index is
/// image * grid.points.size() + keypoint. Parallel over images.
struct DescriptorSet {
  ScaleConfig cfg;
  int stride = 2;
  std::size_t n_images = 0;
  std::size_t per_image = 0;
  BitMatrix bits;
};

DescriptorSet describe_all(std::span<const Eigen::MatrixXd> images,
                           const KeypointGrid& grid, const ScaleConfig& cfg);

/// Per-scale average of the minimal zig-zag AC prefix holding the given
/// energy fraction, over a seeded sample of images and all grid keypoints
/// (keypoint average per image, then image average, rounded to nearest).
/// Blocks with zero AC energy contribute the minimal prefix length 1.
std::vector<int> calibrate_counts(std::span<const Eigen::MatrixXd> images,
                                  const std::vector<int>& block_sizes,
                                  double energy, std::size_t sample_size,
                                  int stride, std::uint64_t seed);

/// MBDCT container: "MBDCT v1 <n_images> <per_image> <bits> <sizes...>
/// <counts...>" then one packed little-endian bitstream per descriptor,
/// image-major / keypoint row-major, each row padded to a byte boundary.
void save_descriptors(const DescriptorSet& set, const std::string& path);
DescriptorSet load_descriptors(const std::string& path);

}  // namespace csproxy

#endif
