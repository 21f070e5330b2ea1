#include "csproxy/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "csproxy/errors.hpp"
#include "csproxy/parallel.hpp"
#include "csproxy/rng.hpp"

namespace csproxy {

double energy_fraction(EnergyLevel level) {
  switch (level) {
    case EnergyLevel::E90: return 0.90;
    case EnergyLevel::E95: return 0.95;
    case EnergyLevel::E100: return 1.0;
  }
  return 1.0;
}

std::string to_string(EnergyLevel level) {
  switch (level) {
    case EnergyLevel::E90: return "E90";
    case EnergyLevel::E95: return "E95";
    case EnergyLevel::E100: return "E100";
  }
  return "E100";
}

EnergyLevel parse_energy_level(const std::string& name) {
  if (name == "E90" || name == "90") return EnergyLevel::E90;
  if (name == "E95" || name == "95") return EnergyLevel::E95;
  if (name == "E100" || name == "100") return EnergyLevel::E100;
  throw ArgumentError("unknown energy level '" + name +
                      "' (expected E90, E95 or E100)");
}

ScaleConfig ScaleConfig::preset(EnergyLevel level) {
  ScaleConfig cfg;
  cfg.energy = level;
  switch (level) {
    case EnergyLevel::E90: cfg.coeff_counts = {15, 26, 37, 73}; break;
    case EnergyLevel::E95: cfg.coeff_counts = {21, 40, 63, 130}; break;
    case EnergyLevel::E100:
      for (int b : cfg.block_sizes) cfg.coeff_counts.push_back(b * b - 1);
      break;
  }
  return cfg;
}

int ScaleConfig::total_bits() const {
  int total = 0;
  for (int c : coeff_counts) total += c;
  return total;
}

std::vector<std::pair<int, int>> ScaleConfig::layout() const {
  std::vector<std::pair<int, int>> segments;
  int offset = 0;
  for (int c : coeff_counts) {
    segments.emplace_back(offset, c);
    offset += c;
  }
  return segments;
}

void ScaleConfig::validate() const {
  if (block_sizes.empty() || block_sizes.size() != coeff_counts.size())
    throw ArgumentError("scale config: need one coefficient count per block "
                        "size");
  for (std::size_t i = 0; i < block_sizes.size(); ++i) {
    const int b = block_sizes[i];
    if (b < 1) throw ArgumentError("scale config: block size must be >= 1");
    if (i > 0 && block_sizes[i] <= block_sizes[i - 1])
      throw ArgumentError("scale config: block sizes must strictly increase");
    if (coeff_counts[i] < 1 || coeff_counts[i] > b * b - 1)
      throw ArgumentError("scale config: coefficient count for size " +
                          std::to_string(b) + " must be in [1, " +
                          std::to_string(b * b - 1) + "]");
  }
}

const Eigen::MatrixXd& dct_basis(int b) {
  if (b < 1) throw ArgumentError("dct basis: block size must be >= 1");
  thread_local std::map<int, Eigen::MatrixXd> cache;
  auto it = cache.find(b);
  if (it == cache.end()) {
    Eigen::MatrixXd basis(b, b);
    const double n = b;
    for (int k = 0; k < b; ++k) {
      const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
      for (int j = 0; j < b; ++j)
        basis(k, j) =
            scale * std::cos(std::numbers::pi * (2.0 * j + 1.0) * k / (2.0 * n));
    }
    it = cache.emplace(b, std::move(basis)).first;
  }
  return it->second;
}

Eigen::MatrixXd dct2(const Eigen::MatrixXd& block) {
  if (block.rows() != block.cols() || block.rows() < 1)
    throw ArgumentError("dct2: block must be square and non-empty");
  const Eigen::MatrixXd& basis = dct_basis(static_cast<int>(block.rows()));
  return basis * block * basis.transpose();
}

Eigen::MatrixXd idct2(const Eigen::MatrixXd& coeffs) {
  if (coeffs.rows() != coeffs.cols() || coeffs.rows() < 1)
    throw ArgumentError("idct2: block must be square and non-empty");
  const Eigen::MatrixXd& basis = dct_basis(static_cast<int>(coeffs.rows()));
  return basis.transpose() * coeffs * basis;
}

const std::vector<std::pair<int, int>>& zigzag_order(int b) {
  if (b < 1) throw ArgumentError("zigzag_order: block size must be >= 1");
  thread_local std::map<int, std::vector<std::pair<int, int>>> cache;
  auto it = cache.find(b);
  if (it == cache.end()) {
    std::vector<std::pair<int, int>> order;
    order.reserve(static_cast<std::size_t>(b) * b);
    for (int d = 0; d <= 2 * (b - 1); ++d) {
      const int lo = std::max(0, d - (b - 1));
      const int hi = std::min(d, b - 1);
      if (d % 2 == 0) {
        for (int r = hi; r >= lo; --r) order.emplace_back(r, d - r);  // up-right
      } else {
        for (int r = lo; r <= hi; ++r) order.emplace_back(r, d - r);  // down-left
      }
    }
    it = cache.emplace(b, std::move(order)).first;
  }
  return it->second;
}

Eigen::MatrixXd extract_block(const Eigen::MatrixXd& image, int row, int col,
                              int b) {
  if (b < 1) throw ArgumentError("extract_block: block size must be >= 1");
  const int rows = static_cast<int>(image.rows());
  const int cols = static_cast<int>(image.cols());
  const int r0 = row - b / 2;
  const int c0 = col - b / 2;
  Eigen::MatrixXd block(b, b);
  for (int r = 0; r < b; ++r) {
    const int sr = std::clamp(r0 + r, 0, rows - 1);
    for (int c = 0; c < b; ++c) {
      const int sc = std::clamp(c0 + c, 0, cols - 1);
      block(r, c) = image(sr, sc);
    }
  }
  return block;
}

KeypointGrid KeypointGrid::regular(int height, int width, int stride) {
  if (stride < 1) throw ArgumentError("keypoint grid: stride must be >= 1");
  KeypointGrid grid;
  grid.stride = stride;
  for (int r = 0; r < height; r += stride)
    for (int c = 0; c < width; c += stride) grid.points.emplace_back(r, c);
  return grid;
}

namespace {

// Reusable buffers for one descriptor pass over an image.
struct Scratch {
  Eigen::MatrixXd block;
  Eigen::MatrixXd tmp;
  Eigen::MatrixXd coeffs;
  std::vector<double> selected;
};

void describe_point_into(const Eigen::MatrixXd& image, int row, int col,
                         const ScaleConfig& cfg, Scratch& scratch,
                         BitMatrix& out, std::size_t out_row) {
  std::size_t bit = 0;
  for (std::size_t s = 0; s < cfg.block_sizes.size(); ++s) {
    const int b = cfg.block_sizes[s];
    const int count = cfg.coeff_counts[s];
    const Eigen::MatrixXd& basis = dct_basis(b);
    const auto& zigzag = zigzag_order(b);

    scratch.block = extract_block(image, row, col, b);
    if (scratch.block.minCoeff() == scratch.block.maxCoeff()) {
      bit += count;  // flat block: every AC coefficient is zero, bits stay 0
      continue;
    }
    // The DC term is discarded anyway; removing the block mean up front keeps
    // the AC coefficients clear of the DC magnitude's rounding noise.
    scratch.block.array() -= scratch.block.mean();
    scratch.tmp.noalias() = basis * scratch.block;
    scratch.coeffs.noalias() = scratch.tmp * basis.transpose();

    scratch.selected.resize(count);
    double sum = 0.0;
    for (int i = 0; i < count; ++i) {
      const auto [zr, zc] = zigzag[static_cast<std::size_t>(i) + 1];  // skip DC
      const double v = scratch.coeffs(zr, zc);
      scratch.selected[i] = v;
      sum += v;
    }
    const double mean = sum / count;
    for (int i = 0; i < count; ++i, ++bit)
      if (scratch.selected[i] > mean) out.set(out_row, bit, true);
  }
}

}  // namespace

BinaryDescriptor describe_point(const Eigen::MatrixXd& image, int row, int col,
                                const ScaleConfig& cfg) {
  cfg.validate();
  Scratch scratch;
  BitMatrix one(1, static_cast<std::size_t>(cfg.total_bits()));
  describe_point_into(image, row, col, cfg, scratch, one, 0);
  BinaryDescriptor d;
  d.bits = one.row_copy(0);
  d.row = row;
  d.col = col;
  return d;
}

BitMatrix describe_dense(const Eigen::MatrixXd& image, const KeypointGrid& grid,
                         const ScaleConfig& cfg) {
  cfg.validate();
  BitMatrix out(grid.points.size(), static_cast<std::size_t>(cfg.total_bits()));
  Scratch scratch;
  for (std::size_t i = 0; i < grid.points.size(); ++i)
    describe_point_into(image, grid.points[i].first, grid.points[i].second, cfg,
                        scratch, out, i);
  return out;
}

DescriptorSet describe_all(std::span<const Eigen::MatrixXd> images,
                           const KeypointGrid& grid, const ScaleConfig& cfg) {
  cfg.validate();
  DescriptorSet set;
  set.cfg = cfg;
  set.stride = grid.stride;
  set.n_images = images.size();
  set.per_image = grid.points.size();
  set.bits = BitMatrix(images.size() * grid.points.size(),
                       static_cast<std::size_t>(cfg.total_bits()));
  parallel_for(0, images.size(), [&](std::size_t img) {
    Scratch scratch;
    const std::size_t base = img * set.per_image;
    for (std::size_t i = 0; i < grid.points.size(); ++i)
      describe_point_into(images[img], grid.points[i].first,
                          grid.points[i].second, cfg, scratch, set.bits,
                          base + i);
  });
  return set;
}

std::vector<int> calibrate_counts(std::span<const Eigen::MatrixXd> images,
                                  const std::vector<int>& block_sizes,
                                  double energy, std::size_t sample_size,
                                  int stride, std::uint64_t seed) {
  if (images.empty() || sample_size == 0)
    throw ArgumentError("calibrate_counts: empty sample");
  if (sample_size > images.size())
    throw ArgumentError("calibrate_counts: sample size exceeds image count");
  if (!(energy > 0.0) || energy > 1.0)
    throw ArgumentError("calibrate_counts: energy must be in (0,1]");

  const auto picks = rng::sample_indices(images.size(), sample_size, seed);
  std::vector<int> counts;
  counts.reserve(block_sizes.size());
  for (const int b : block_sizes) {
    if (b < 1) throw ArgumentError("calibrate_counts: block size must be >= 1");
    const int n_ac = b * b - 1;
    if (energy >= 1.0) {  // full AC set by definition
      counts.push_back(n_ac);
      continue;
    }
    std::vector<double> image_means(picks.size(), 0.0);
    parallel_for(0, picks.size(), [&](std::size_t pi) {
      const Eigen::MatrixXd& img = images[picks[pi]];
      const auto grid = KeypointGrid::regular(
          static_cast<int>(img.rows()), static_cast<int>(img.cols()), stride);
      const Eigen::MatrixXd& basis = dct_basis(b);
      const auto& zigzag = zigzag_order(b);
      Eigen::MatrixXd block, tmp, coeffs;
      double sum_len = 0.0;
      for (const auto& [kr, kc] : grid.points) {
        block = extract_block(img, kr, kc, b);
        if (block.minCoeff() == block.maxCoeff()) {
          sum_len += 1;  // zero AC energy: minimal valid prefix
          continue;
        }
        block.array() -= block.mean();  // DC is excluded from the energy
        tmp.noalias() = basis * block;
        coeffs.noalias() = tmp * basis.transpose();
        double total = 0.0;
        for (int i = 1; i <= n_ac; ++i) {
          const auto [zr, zc] = zigzag[static_cast<std::size_t>(i)];
          const double v = coeffs(zr, zc);
          total += v * v;
        }
        int len = 1;
        if (total > 0.0) {
          const double target = energy * total;
          double prefix = 0.0;
          for (int i = 1; i <= n_ac; ++i) {
            const auto [zr, zc] = zigzag[static_cast<std::size_t>(i)];
            const double v = coeffs(zr, zc);
            prefix += v * v;
            if (prefix >= target) {
              len = i;
              break;
            }
            len = i;  // falls through to n_ac when rounding leaves a sliver
          }
        }
        sum_len += len;
      }
      image_means[pi] = sum_len / static_cast<double>(grid.points.size());
    });
    double mean = 0.0;
    for (double v : image_means) mean += v;
    mean /= static_cast<double>(image_means.size());
    counts.push_back(static_cast<int>(std::lround(mean)));
  }
  return counts;
}

void save_descriptors(const DescriptorSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "MBDCT v1 " << set.n_images << " " << set.per_image << " "
      << set.bits.bits();
  for (int b : set.cfg.block_sizes) out << " " << b;
  for (int c : set.cfg.coeff_counts) out << " " << c;
  out << "\n";
  const std::size_t row_bytes = (set.bits.bits() + 7) / 8;
  std::string buf;
  buf.reserve(row_bytes);
  for (std::size_t r = 0; r < set.bits.rows(); ++r) {
    const BitView row = set.bits.row(r);
    buf.assign(row_bytes, '\0');
    for (std::size_t j = 0; j < row_bytes; ++j)
      buf[j] = static_cast<char>(
          static_cast<std::uint8_t>(row.words[j >> 3] >> ((j & 7) * 8)));
    out.write(buf.data(), static_cast<std::streamsize>(row_bytes));
  }
  if (!out) throw IoError("write failed: " + path);
}

DescriptorSet load_descriptors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("truncated file: " + path);
  std::istringstream hs(header);
  std::string tag, version;
  std::size_t n_images = 0, per_image = 0, bits = 0;
  hs >> tag >> version >> n_images >> per_image >> bits;
  if (tag != "MBDCT" || version != "v1" || hs.fail())
    throw FormatError(path + ": bad MBDCT header '" + header + "'");
  std::vector<int> tail;
  for (int v; hs >> v;) tail.push_back(v);
  if (tail.empty() || tail.size() % 2 != 0)
    throw FormatError(path + ": MBDCT header needs <sizes...> <counts...>");

  DescriptorSet set;
  set.cfg.block_sizes.assign(tail.begin(),
                             tail.begin() + static_cast<long>(tail.size() / 2));
  set.cfg.coeff_counts.assign(tail.begin() + static_cast<long>(tail.size() / 2),
                              tail.end());
  set.cfg.validate();
  if (static_cast<std::size_t>(set.cfg.total_bits()) != bits)
    throw FormatError(path + ": header bit count disagrees with scale counts");
  set.n_images = n_images;
  set.per_image = per_image;
  set.bits = BitMatrix(n_images * per_image, bits);

  const std::size_t row_bytes = (bits + 7) / 8;
  std::string buf(row_bytes, '\0');
  for (std::size_t r = 0; r < set.bits.rows(); ++r) {
    in.read(buf.data(), static_cast<std::streamsize>(row_bytes));
    if (static_cast<std::size_t>(in.gcount()) != row_bytes)
      throw IoError("truncated file: " + path);
    const BitVec row = BitVec::from_bytes(
        bits, reinterpret_cast<const std::uint8_t*>(buf.data()), row_bytes);
    set.bits.set_row(r, row);
  }
  return set;
}

}  // namespace csproxy
