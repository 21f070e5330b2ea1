#include "csproxy/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "csproxy/errors.hpp"
#include "csproxy/parallel.hpp"
#include "csproxy/rng.hpp"

namespace csproxy {

namespace {

constexpr double kChiSquareEps = 1e-10;

using Neighbor = std::pair<double, std::size_t>;  // (distance, train index)

/// Neighbors of query among train, sorted by (distance, index), truncated
/// to the first limit entries.
std::vector<Neighbor> sorted_neighbors(const std::vector<FeatureVector>& train,
                                       const Eigen::VectorXd& query,
                                       std::size_t limit) {
  std::vector<Neighbor> all(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    all[i] = {chi_square(train[i].values, query), i};
  const std::size_t keep = std::min(limit, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<long>(keep),
                    all.end());
  all.resize(keep);
  return all;
}

/// Majority vote over the first k sorted neighbors with the documented tie
/// chain: count, then summed distance, then class id.
int vote(const std::vector<Neighbor>& neighbors, std::size_t k,
         const std::vector<FeatureVector>& train) {
  std::map<int, std::pair<int, double>> tally;  // label -> (count, dist sum)
  for (std::size_t i = 0; i < k && i < neighbors.size(); ++i) {
    auto& entry = tally[train[neighbors[i].second].label];
    entry.first += 1;
    entry.second += neighbors[i].first;
  }
  int best_label = -1;
  int best_count = -1;
  double best_sum = std::numeric_limits<double>::infinity();
  for (const auto& [label, entry] : tally) {  // ascending label order
    const auto [count, sum] = entry;
    if (count > best_count ||
        (count == best_count && sum < best_sum)) {
      best_label = label;
      best_count = count;
      best_sum = sum;
    }
  }
  return best_label;
}

}  // namespace

double chi_square(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw ArgumentError("chi_square: dimensions differ (" +
                        std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  const auto diff = (a - b).array();
  const auto denom = (a + b).array() + kChiSquareEps;
  return 0.5 * (diff.square() / denom).sum();
}

KnnModel::KnnModel(std::vector<FeatureVector> train, int k)
    : train_(std::move(train)), k_(k) {
  if (train_.empty()) throw ArgumentError("knn: empty training set");
  if (k_ < 1 || static_cast<std::size_t>(k_) > train_.size())
    throw ArgumentError("knn: k=" + std::to_string(k_) +
                        " not in [1, " + std::to_string(train_.size()) + "]");
  const Eigen::Index dim = train_.front().values.size();
  for (const auto& f : train_) {
    if (f.values.size() != dim)
      throw ArgumentError("knn: training vectors have mixed dimensions");
    if (f.label < 0) throw ArgumentError("knn: training vector lacks a label");
  }
}

int knn_predict(const KnnModel& model, const Eigen::VectorXd& query) {
  if (query.size() != model.train().front().values.size())
    throw ArgumentError("knn_predict: query dimension mismatch");
  const auto neighbors = sorted_neighbors(
      model.train(), query, static_cast<std::size_t>(model.k()));
  return vote(neighbors, static_cast<std::size_t>(model.k()), model.train());
}

std::vector<int> make_folds(std::span<const int> labels, int folds,
                            std::uint64_t seed) {
  if (folds < 2) throw ArgumentError("make_folds: need at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(folds))
    throw ArgumentError("make_folds: fewer samples than folds");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_label[labels[i]].push_back(i);

  rng::Generator gen(seed);
  std::vector<int> fold_of(labels.size(), 0);
  int next_fold = 0;
  for (auto& [label, idx] : by_label) {  // ascending label order
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
      const std::size_t j = i + gen.next_below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i : idx) {
      fold_of[i] = next_fold;
      next_fold = (next_fold + 1) % folds;
    }
  }
  return fold_of;
}

int cross_validate_k(const std::vector<FeatureVector>& features,
                     std::span<const int> candidate_ks, int folds,
                     std::uint64_t seed) {
  if (candidate_ks.empty())
    throw ArgumentError("cross_validate_k: no candidate k values");
  if (features.size() < static_cast<std::size_t>(folds) || folds < 2)
    throw ArgumentError("cross_validate_k: need folds >= 2 and at least one "
                        "sample per fold");
  std::vector<int> labels(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].label < 0)
      throw ArgumentError("cross_validate_k: unlabeled feature");
    labels[i] = features[i].label;
  }
  const std::vector<int> fold_of = make_folds(labels, folds, seed);

  std::vector<int> ks(candidate_ks.begin(), candidate_ks.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() < 1)
    throw ArgumentError("cross_validate_k: candidate k must be >= 1");

  std::vector<double> mean_error(ks.size(), 0.0);
  for (int fold = 0; fold < folds; ++fold) {
    std::vector<FeatureVector> fold_train;
    std::vector<std::size_t> val_idx;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (fold_of[i] == fold)
        val_idx.push_back(i);
      else
        fold_train.push_back(features[i]);
    }
    if (val_idx.empty() || fold_train.empty()) continue;
    const std::size_t kmax = std::min<std::size_t>(
        static_cast<std::size_t>(ks.back()), fold_train.size());

    std::vector<std::vector<Neighbor>> neighbor_lists(val_idx.size());
    parallel_for(0, val_idx.size(), [&](std::size_t q) {
      neighbor_lists[q] =
          sorted_neighbors(fold_train, features[val_idx[q]].values, kmax);
    });

    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      const std::size_t k_eff =
          std::min<std::size_t>(static_cast<std::size_t>(ks[ki]), kmax);
      std::size_t errors = 0;
      for (std::size_t q = 0; q < val_idx.size(); ++q)
        if (vote(neighbor_lists[q], k_eff, fold_train) !=
            features[val_idx[q]].label)
          ++errors;
      mean_error[ki] += static_cast<double>(errors) /
                        static_cast<double>(val_idx.size());
    }
  }

  std::size_t best = 0;
  for (std::size_t ki = 1; ki < ks.size(); ++ki)
    if (mean_error[ki] < mean_error[best]) best = ki;  // ties: smallest k wins
  return ks[best];
}

EvalReport evaluate(const KnnModel& model,
                    const std::vector<FeatureVector>& test) {
  if (test.empty()) throw ArgumentError("evaluate: empty test set");
  const Eigen::Index dim = model.train().front().values.size();
  int max_label = 0;
  for (const auto& f : model.train()) max_label = std::max(max_label, f.label);
  for (const auto& f : test) {
    if (f.values.size() != dim)
      throw ArgumentError("evaluate: test vector dimension mismatch");
    if (f.label < 0) throw ArgumentError("evaluate: unlabeled test vector");
    max_label = std::max(max_label, f.label);
  }

  std::vector<int> predicted(test.size(), 0);
  parallel_for(0, test.size(), [&](std::size_t i) {
    predicted[i] = knn_predict(model, test[i].values);
  });

  EvalReport report;
  report.k = model.k();
  report.confusion = Eigen::MatrixXi::Zero(max_label + 1, max_label + 1);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    report.confusion(test[i].label, predicted[i]) += 1;
    if (predicted[i] != test[i].label) ++errors;
  }
  report.error_rate =
      static_cast<double>(errors) / static_cast<double>(test.size());
  return report;
}

}  // namespace csproxy
