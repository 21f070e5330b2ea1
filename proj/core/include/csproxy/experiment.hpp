#ifndef CSPROXY_EXPERIMENT_HPP
#define CSPROXY_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csproxy/classifier.hpp"
#include "csproxy/codebook.hpp"
#include "csproxy/dataset.hpp"
#include "csproxy/descriptor.hpp"
#include "csproxy/sensing.hpp"

namespace csproxy {

struct DatasetConfig {
  std::string images;
  std::string labels;
  std::size_t train_count = 50000;
  std::size_t test_count = 10000;
  std::size_t subsample_train = 0;  // 0 keeps the whole split
  std::size_t subsample_test = 0;
};

struct DescriptorConfig {
  std::vector<int> block_sizes{8, 12, 16, 24};
  std::string energy = "E100";
  std::vector<int> coeff_counts;  // empty: stock budgets for the energy level
  int stride = 2;
};

struct CodebookConfig {
  int k = 512;
  int sample_images = 100;  // dictionary training proxies
  int max_iters = 100;
};

struct ClassifierConfig {
  std::vector<int> k_grid{1, 3, 5, 7, 9, 11};
  int folds = 5;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<double> rates{0.25, 0.10, 0.05, 0.01};
  std::uint64_t seed = 1;
  DescriptorConfig descriptor;
  CodebookConfig codebook;
  ClassifierConfig classifier;
  std::string external_train_features;  // optional, index-aligned with split
  std::string external_test_features;
  std::string matrix_path;  // optional externally learned sensing matrix
  std::string out_dir = "out";

  ScaleConfig scale_config() const;
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string config_json(const ExperimentConfig& cfg);

/// "--override key=value" with dotted keys (descriptor.stride=4,
/// rates=0.25,0.1). Values parse as JSON when possible, else as strings;
/// comma-separated scalars become arrays.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Human-readable error table: one row per measurement rate (descending,
/// matching the usual presentation order), one column per feature kind,
/// percentages with two decimals.
std::string report_table(std::span<const EvalReport> reports);

/// Machine-readable records, one per configuration:
/// rate<TAB>energy<TAB>kind<TAB>k<TAB>error_rate. Byte-stable per config.
std::string report_records(std::span<const EvalReport> reports);

/// Inverse of report_records (confusion matrices are not carried).
std::vector<EvalReport> parse_records(const std::string& text);

/// An experiment over one dataset: sense -> proxy -> describe -> codebook ->
/// encode (-> fuse) -> classify, with content-addressed artifact caching
/// under <out_dir>/cache. Stage methods are independently callable (the CLI
/// subcommands map onto them); any artifact that fails to reload is flagged
/// on stderr and rebuilt.
class Experiment {
 public:
  enum class Part { Train, Test };

  explicit Experiment(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const ImageSet& train() const { return train_; }
  const ImageSet& test() const { return test_; }

  /// Rates this run sweeps: config rates, or the loaded matrix's m/n.
  std::vector<double> effective_rates();

  /// Cached generate-or-load of the sensing operator for one rate.
  MeasurementMatrix measurement_matrix(double rate);

  std::vector<Eigen::MatrixXd> proxies(const MeasurementMatrix& psi,
                                       Part part) const;

  /// Dense MB-DCT descriptors of the proxies for one split part.
  DescriptorSet descriptors(const MeasurementMatrix& psi, Part part);

  /// Hamming k-means codebook from the dictionary sample of train proxies.
  Codebook train_codebook(const MeasurementMatrix& psi);

  /// Labeled BoW histograms for one part.
  std::vector<FeatureVector> bow_features(const MeasurementMatrix& psi,
                                          Part part);

  /// BoW report, plus a fused report when external features are configured.
  /// Reports carry the nominal sweep rate (the realized m/n is visible in
  /// the sensing provenance); it defaults to the matrix's own m/n.
  std::vector<EvalReport> classify_rate(const MeasurementMatrix& psi);
  std::vector<EvalReport> classify_rate(const MeasurementMatrix& psi,
                                        double nominal_rate);

  /// Coefficient-budget calibration on proxies at one rate, or on the
  /// original (unsensed) training images when rate is absent.
  std::vector<int> calibrate(std::optional<double> rate, double energy,
                             std::size_t sample_size);

  /// The full sweep; writes report.txt and records.tsv under out_dir.
  std::vector<EvalReport> run();

  void write_reports(std::span<const EvalReport> reports) const;

 private:
  std::string cache_dir() const;
  std::string dataset_key() const;
  std::string matrix_key(double rate) const;
  std::string matrix_key(const MeasurementMatrix& psi) const;
  std::string descriptor_key(const MeasurementMatrix& psi, Part part) const;
  std::string codebook_key(const MeasurementMatrix& psi) const;

  ExperimentConfig cfg_;
  ImageSet train_;
  ImageSet test_;
  std::vector<FeatureVector> external_train_;
  std::vector<FeatureVector> external_test_;
};

}  // namespace csproxy

#endif
