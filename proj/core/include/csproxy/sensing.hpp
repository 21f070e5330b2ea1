#ifndef CSPROXY_SENSING_HPP
#define CSPROXY_SENSING_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace csproxy {

/// Where a measurement matrix came from; recorded in experiment reports.
struct Provenance {
  enum class Kind { Random, Loaded };
  Kind kind = Kind::Random;
  std::uint64_t seed = 0;   // Random only
  double variance = 0.0;    // Random only (1/m)
  std::string path;         // Loaded only

  std::string describe() const;
};

/// The m x n sensing operator. Entries of a generated matrix are i.i.d.
/// gaussian with mean 0 and variance 1/m; m <= n always holds.
class MeasurementMatrix {
 public:
  enum class SaveFormat { Text, Binary };

  static MeasurementMatrix generate(Eigen::Index m, Eigen::Index n,
                                    std::uint64_t seed);
  static MeasurementMatrix load(const std::string& path);
  /// Wraps existing entries (identity operators, test fixtures).
  static MeasurementMatrix from_entries(Eigen::MatrixXd entries,
                                        Provenance provenance);

  /// PSIMAT container. Text: "PSIMAT v1 <m> <n>" then m rows of n floats
  /// printed with %.17g (lossless). Binary: "PSIMAT v1 <m> <n> bin" then
  /// m*n little-endian f64, row-major. Both loaders agree to 0 ULP.
  void save(const std::string& path,
            SaveFormat format = SaveFormat::Binary) const;

  Eigen::Index measurements() const { return entries_.rows(); }
  Eigen::Index signal_dim() const { return entries_.cols(); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  const Provenance& provenance() const { return provenance_; }
  double rate() const {
    return static_cast<double>(entries_.rows()) / entries_.cols();
  }

 private:
  MeasurementMatrix(Eigen::MatrixXd entries, Provenance provenance);

  Eigen::MatrixXd entries_;
  Provenance provenance_;
};

/// m = round(rate * n), clamped to at least 1. rate must be in (0, 1].
std::size_t measurement_count(double rate, std::size_t n);

/// A compressively sensed vector y and the rate m/n it was taken at.
struct Measurement {
  Eigen::VectorXd values;
  double rate = 0.0;
};

/// y = Psi * vec(image), row-major flattening.
Measurement sense(const Eigen::MatrixXd& image, const MeasurementMatrix& psi);

/// Proxy recovery: reshape(Psi^T * y, height, width), row-major — the same
/// flattening convention as sense().
Eigen::MatrixXd back_project(const Measurement& y, const MeasurementMatrix& psi,
                             Eigen::Index height, Eigen::Index width);
Eigen::MatrixXd back_project(const Eigen::VectorXd& y,
                             const MeasurementMatrix& psi, Eigen::Index height,
                             Eigen::Index width);

/// Psi^T Psi applied to every image in one pass (blocked matrix products).
/// Equivalent to back_project(sense(img)) per image.
std::vector<Eigen::MatrixXd> proxy_batch(
    const std::vector<Eigen::MatrixXd>& images, const MeasurementMatrix& psi);

}  // namespace csproxy

#endif
