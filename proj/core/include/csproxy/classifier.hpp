#ifndef CSPROXY_CLASSIFIER_HPP
#define CSPROXY_CLASSIFIER_HPP

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csproxy/codebook.hpp"

namespace csproxy {

/// d(a,b) = 1/2 * sum (a_i-b_i)^2 / (a_i+b_i+eps) with eps = 1e-10;
/// all-zero coordinate pairs contribute nothing.
double chi_square(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Exact chi-square KNN over labeled feature vectors.
class KnnModel {
 public:
  KnnModel(std::vector<FeatureVector> train, int k);

  const std::vector<FeatureVector>& train() const { return train_; }
  int k() const { return k_; }

 private:
  std::vector<FeatureVector> train_;
  int k_;
};

/// Majority label among the k nearest neighbors. Distance ties prefer the
/// lower training index; vote ties prefer the class with the smaller summed
/// distance among its in-k members, then the lower class id.
int knn_predict(const KnnModel& model, const Eigen::VectorXd& query);

/// Seeded stratified-as-possible fold assignment: per-label shuffle, then
/// round-robin dealing. Returns fold index per feature.
std::vector<int> make_folds(std::span<const int> labels, int folds,
                            std::uint64_t seed);

/// Picks the candidate k with the lowest mean validation error over the
/// folds; error ties go to the smallest k.
int cross_validate_k(const std::vector<FeatureVector>& features,
                     std::span<const int> candidate_ks, int folds,
                     std::uint64_t seed);

struct EvalReport {
  double error_rate = 0.0;
  Eigen::MatrixXi confusion;  // rows: true class, cols: predicted

  // configuration the numbers belong to
  double measurement_rate = 0.0;
  std::string energy;
  std::string feature_kind;
  std::string sensing;  // provenance summary of the measurement matrix
  int k = 0;
  std::uint64_t seed = 0;
};

/// Classifies every test vector; fills error_rate and the confusion matrix.
EvalReport evaluate(const KnnModel& model,
                    const std::vector<FeatureVector>& test);

}  // namespace csproxy

#endif
