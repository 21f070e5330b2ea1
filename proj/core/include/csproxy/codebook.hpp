#ifndef CSPROXY_CODEBOOK_HPP
#define CSPROXY_CODEBOOK_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "csproxy/bitvec.hpp"

namespace csproxy {

/// K binary centroids learned by Hamming-distance k-means.
struct Codebook {
  BitMatrix centroids;
  std::uint64_t seed = 0;
  int iterations = 0;         // Lloyd iterations actually run
  std::string sample_source;  // free-form training provenance

  std::size_t k() const { return centroids.rows(); }
  std::size_t bit_length() const { return centroids.bits(); }
};

struct KMeansTrace {
  std::vector<std::uint64_t> inertia;  // after each assignment step
};

/// Lloyd iterations in Hamming space: nearest-centroid assignment (ties to
/// the lowest centroid index), bitwise-majority centroid update (bit ties
/// resolve to 1), empty clusters repaired by seizing the descriptor farthest
/// from its assigned centroid. Initial centroids are k distinct descriptor
/// patterns drawn with the given seed. Stops when assignments are stable or
/// after max_iters.
Codebook kmeans_hamming(const BitMatrix& descriptors, std::size_t k,
                        std::uint64_t seed, int max_iters = 100,
                        KMeansTrace* trace = nullptr);

/// Hard-voting bag of words: h[j] = fraction of descriptors whose nearest
/// centroid is j (ties to the lowest index). Sums to 1.
Eigen::VectorXd encode_bow(const BitMatrix& descriptors,
                           const Codebook& codebook);

/// encode_bow over the row range [row_begin, row_end) of a pooled
/// descriptor matrix (one image's slice of a DescriptorSet).
Eigen::VectorXd encode_bow(const BitMatrix& descriptors, std::size_t row_begin,
                           std::size_t row_end, const Codebook& codebook);

enum class FeatureKind { Bow, External, Fused };

std::string to_string(FeatureKind kind);

/// A real-valued image signature: BoW histogram, externally computed
/// feature, or their L2-normalized concatenation.
struct FeatureVector {
  Eigen::VectorXd values;
  int label = -1;  // negative = unlabeled
  FeatureKind kind = FeatureKind::External;
};

/// v / ||v||2; the zero vector passes through unchanged.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

/// concat(l2_normalize(a), l2_normalize(b)). Labels must agree when both
/// are present; the result carries whichever label exists.
FeatureVector fuse(const FeatureVector& a, const FeatureVector& b);

/// CBOOK container: "CBOOK v1 <k> <bits>" + packed little-endian centroids.
void save_codebook(const Codebook& codebook, const std::string& path);
Codebook load_codebook(const std::string& path);

/// FEAT container: "FEAT v1 <count> <dim>" followed by count rows of dim
/// little-endian f64 (binary, default) or "FEAT v1 <count> <dim> text" with
/// one %.17g-formatted row per line. Labels live in the dataset, not here.
enum class FeatureFileFormat { Binary, Text };
void save_features(const std::vector<FeatureVector>& features,
                   const std::string& path,
                   FeatureFileFormat format = FeatureFileFormat::Binary);
std::vector<FeatureVector> load_features(const std::string& path);

/// load_features with kind = External; row count validated by the caller
/// against the dataset split it must align with.
std::vector<FeatureVector> load_external_features(const std::string& path);

}  // namespace csproxy

#endif
