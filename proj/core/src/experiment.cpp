#include "csproxy/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csproxy/errors.hpp"
#include "csproxy/parallel.hpp"
#include "csproxy/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace csproxy {

namespace {

std::string fmt(const char* format, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::uint64_t file_fnv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return rng::fnv1a(bytes);
}

void ensure_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& context) {
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key))
      throw ArgumentError("config: unknown key '" + key + "' in " + context);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = {{"images", cfg.dataset.images},
                  {"labels", cfg.dataset.labels},
                  {"train_count", cfg.dataset.train_count},
                  {"test_count", cfg.dataset.test_count},
                  {"subsample_train", cfg.dataset.subsample_train},
                  {"subsample_test", cfg.dataset.subsample_test}};
  j["rates"] = cfg.rates;
  j["seed"] = cfg.seed;
  j["descriptor"] = {{"block_sizes", cfg.descriptor.block_sizes},
                     {"energy", cfg.descriptor.energy},
                     {"coeff_counts", cfg.descriptor.coeff_counts},
                     {"stride", cfg.descriptor.stride}};
  j["codebook"] = {{"k", cfg.codebook.k},
                   {"sample_images", cfg.codebook.sample_images},
                   {"max_iters", cfg.codebook.max_iters}};
  j["classifier"] = {{"k_grid", cfg.classifier.k_grid},
                     {"folds", cfg.classifier.folds}};
  j["external_features"] = {{"train", cfg.external_train_features},
                            {"test", cfg.external_test_features}};
  j["matrix_path"] = cfg.matrix_path;
  j["out_dir"] = cfg.out_dir;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ensure_keys(j,
              {"dataset", "rates", "seed", "descriptor", "codebook",
               "classifier", "external_features", "matrix_path", "out_dir"},
              "top level");
  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    ensure_keys(d,
                {"images", "labels", "train_count", "test_count",
                 "subsample_train", "subsample_test"},
                "dataset");
    cfg.dataset.images = d.value("images", cfg.dataset.images);
    cfg.dataset.labels = d.value("labels", cfg.dataset.labels);
    cfg.dataset.train_count = d.value("train_count", cfg.dataset.train_count);
    cfg.dataset.test_count = d.value("test_count", cfg.dataset.test_count);
    cfg.dataset.subsample_train =
        d.value("subsample_train", cfg.dataset.subsample_train);
    cfg.dataset.subsample_test =
        d.value("subsample_test", cfg.dataset.subsample_test);
  }
  cfg.rates = j.value("rates", cfg.rates);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("descriptor")) {
    const json& d = j.at("descriptor");
    ensure_keys(d, {"block_sizes", "energy", "coeff_counts", "stride"},
                "descriptor");
    cfg.descriptor.block_sizes =
        d.value("block_sizes", cfg.descriptor.block_sizes);
    cfg.descriptor.energy = d.value("energy", cfg.descriptor.energy);
    cfg.descriptor.coeff_counts =
        d.value("coeff_counts", cfg.descriptor.coeff_counts);
    cfg.descriptor.stride = d.value("stride", cfg.descriptor.stride);
  }
  if (j.contains("codebook")) {
    const json& d = j.at("codebook");
    ensure_keys(d, {"k", "sample_images", "max_iters"}, "codebook");
    cfg.codebook.k = d.value("k", cfg.codebook.k);
    cfg.codebook.sample_images =
        d.value("sample_images", cfg.codebook.sample_images);
    cfg.codebook.max_iters = d.value("max_iters", cfg.codebook.max_iters);
  }
  if (j.contains("classifier")) {
    const json& d = j.at("classifier");
    ensure_keys(d, {"k_grid", "folds"}, "classifier");
    cfg.classifier.k_grid = d.value("k_grid", cfg.classifier.k_grid);
    cfg.classifier.folds = d.value("folds", cfg.classifier.folds);
  }
  if (j.contains("external_features")) {
    const json& d = j.at("external_features");
    ensure_keys(d, {"train", "test"}, "external_features");
    cfg.external_train_features = d.value("train", std::string());
    cfg.external_test_features = d.value("test", std::string());
  }
  cfg.matrix_path = j.value("matrix_path", cfg.matrix_path);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

}  // namespace

ScaleConfig ExperimentConfig::scale_config() const {
  ScaleConfig sc;
  sc.block_sizes = descriptor.block_sizes;
  sc.energy = parse_energy_level(descriptor.energy);
  if (!descriptor.coeff_counts.empty()) {
    sc.coeff_counts = descriptor.coeff_counts;
  } else if (sc.energy == EnergyLevel::E100) {
    for (int b : sc.block_sizes) sc.coeff_counts.push_back(b * b - 1);
  } else if (sc.block_sizes == std::vector<int>{8, 12, 16, 24}) {
    sc.coeff_counts = ScaleConfig::preset(sc.energy).coeff_counts;
  } else {
    throw ArgumentError(
        "config: custom block sizes need explicit coeff_counts unless "
        "energy is E100");
  }
  sc.validate();
  return sc;
}

void ExperimentConfig::validate() const {
  if (dataset.images.empty() || dataset.labels.empty())
    throw ArgumentError("config: dataset image/label paths are required");
  for (const std::string& path : {dataset.images, dataset.labels})
    if (!fs::exists(path)) throw ArgumentError("config: missing file " + path);
  if (dataset.train_count == 0 || dataset.test_count == 0)
    throw ArgumentError("config: train_count and test_count must be >= 1");
  if (dataset.subsample_train > dataset.train_count)
    throw ArgumentError("config: subsample_train exceeds train_count");
  if (dataset.subsample_test > dataset.test_count)
    throw ArgumentError("config: subsample_test exceeds test_count");
  if (matrix_path.empty()) {
    if (rates.empty()) throw ArgumentError("config: no measurement rates");
    for (double r : rates)
      if (!(r > 0.0) || r > 1.0)
        throw ArgumentError("config: rate " + std::to_string(r) +
                            " outside (0, 1]");
  } else if (!fs::exists(matrix_path)) {
    throw ArgumentError("config: missing file " + matrix_path);
  }
  if (descriptor.stride < 1)
    throw ArgumentError("config: stride must be >= 1");
  scale_config();
  if (codebook.k < 1 || codebook.sample_images < 1 || codebook.max_iters < 1)
    throw ArgumentError("config: codebook parameters must be >= 1");
  if (classifier.k_grid.empty())
    throw ArgumentError("config: empty classifier k grid");
  for (int k : classifier.k_grid)
    if (k < 1) throw ArgumentError("config: classifier k must be >= 1");
  if (classifier.folds < 2)
    throw ArgumentError("config: cross-validation needs >= 2 folds");
  if (external_train_features.empty() != external_test_features.empty())
    throw ArgumentError(
        "config: external features need both train and test files");
  for (const std::string& path :
       {external_train_features, external_test_features})
    if (!path.empty() && !fs::exists(path))
      throw ArgumentError("config: missing file " + path);
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string config_json(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump();
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ArgumentError("override must look like key=value, got '" +
                        assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  auto parse_scalar = [](const std::string& text) -> json {
    try {
      return json::parse(text);
    } catch (const json::exception&) {
      return json(text);
    }
  };
  json parsed;
  if (value.find(',') != std::string::npos) {
    parsed = json::array();
    std::istringstream vs(value);
    std::string piece;
    while (std::getline(vs, piece, ',')) parsed.push_back(parse_scalar(piece));
  } else {
    parsed = parse_scalar(value);
  }

  json j = config_to_json(cfg);
  json* node = &j;
  std::istringstream ks(key);
  std::vector<std::string> parts;
  std::string part;
  while (std::getline(ks, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ArgumentError("override: empty key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i)
    node = &((*node)[parts[i]]);
  (*node)[parts.back()] = parsed;
  try {
    cfg = config_from_json(j);
  } catch (const json::exception& e) {
    throw ArgumentError("override '" + assignment + "': " + e.what());
  }
}

std::string report_table(std::span<const EvalReport> reports) {
  std::vector<std::string> kinds;
  for (const char* kind : {"bow", "external", "fused"})
    for (const auto& r : reports)
      if (r.feature_kind == kind &&
          std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
        kinds.push_back(kind);
  if (kinds.empty()) kinds = {"bow"};

  std::vector<double> rates;
  for (const auto& r : reports)
    if (std::find(rates.begin(), rates.end(), r.measurement_rate) ==
        rates.end())
      rates.push_back(r.measurement_rate);
  std::sort(rates.rbegin(), rates.rend());

  std::ostringstream out;
  out << "MR";
  for (const auto& kind : kinds) out << "\t" << kind;
  out << "\n";
  for (double rate : rates) {
    out << fmt("%.6g", rate);
    for (const auto& kind : kinds) {
      const EvalReport* found = nullptr;
      for (const auto& r : reports)
        if (r.measurement_rate == rate && r.feature_kind == kind) {
          found = &r;
          break;
        }
      out << "\t" << (found ? fmt("%.2f%%", found->error_rate * 100.0) : "-");
    }
    out << "\n";
  }
  return out.str();
}

std::string report_records(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << "rate\tenergy\tkind\tk\terror_rate\n";
  for (const auto& r : reports)
    out << fmt("%.6g", r.measurement_rate) << "\t" << r.energy << "\t"
        << r.feature_kind << "\t" << r.k << "\t"
        << fmt("%.10g", r.error_rate) << "\n";
  return out.str();
}

std::vector<EvalReport> parse_records(const std::string& text) {
  std::vector<EvalReport> reports;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("rate\t", 0) == 0) continue;  // header
    }
    std::istringstream ls(line);
    EvalReport r;
    std::string rate_s, k_s, err_s;
    if (!std::getline(ls, rate_s, '\t') || !std::getline(ls, r.energy, '\t') ||
        !std::getline(ls, r.feature_kind, '\t') ||
        !std::getline(ls, k_s, '\t') || !std::getline(ls, err_s))
      throw FormatError("records: bad line '" + line + "'");
    try {
      r.measurement_rate = std::stod(rate_s);
      r.k = std::stoi(k_s);
      r.error_rate = std::stod(err_s);
    } catch (const std::exception&) {
      throw FormatError("records: bad numeric field in '" + line + "'");
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const ImageSet all = load_idx(cfg_.dataset.images, cfg_.dataset.labels);
  auto [train_full, test_full] =
      split(all, cfg_.dataset.train_count, cfg_.dataset.test_count);

  const bool fuse_enabled = !cfg_.external_train_features.empty();
  std::vector<FeatureVector> ext_train_full, ext_test_full;
  if (fuse_enabled) {
    ext_train_full = load_external_features(cfg_.external_train_features);
    ext_test_full = load_external_features(cfg_.external_test_features);
    if (ext_train_full.size() != train_full.size())
      throw ConsistencyError(
          "external train features: " + std::to_string(ext_train_full.size()) +
          " rows for " + std::to_string(train_full.size()) + " images");
    if (ext_test_full.size() != test_full.size())
      throw ConsistencyError(
          "external test features: " + std::to_string(ext_test_full.size()) +
          " rows for " + std::to_string(test_full.size()) + " images");
  }

  auto apply_part = [&](ImageSet& full, std::vector<FeatureVector>& ext_full,
                        std::size_t n, const char* tag, ImageSet& out,
                        std::vector<FeatureVector>& ext_out) {
    if (n == 0 || n == full.size()) {
      out = std::move(full);
      ext_out = std::move(ext_full);
    } else {
      const auto idx =
          subsample_indices(full.size(), n, rng::derive_seed(cfg_.seed, tag));
      out = take(full, idx);
      if (fuse_enabled) {
        ext_out.reserve(idx.size());
        for (std::size_t i : idx) ext_out.push_back(ext_full[i]);
      }
    }
    for (std::size_t i = 0; i < ext_out.size(); ++i)
      ext_out[i].label = out.labels[i];
  };
  apply_part(train_full, ext_train_full, cfg_.dataset.subsample_train,
             "subsample-train", train_, external_train_);
  apply_part(test_full, ext_test_full, cfg_.dataset.subsample_test,
             "subsample-test", test_, external_test_);

  if (train_.height != test_.height || train_.width != test_.width)
    throw ConsistencyError("train/test image dimensions differ");
}

std::string Experiment::cache_dir() const { return cfg_.out_dir + "/cache"; }

std::string Experiment::dataset_key() const {
  std::ostringstream key;
  key << "data|ck=" << hex16(train_.checksum)
      << "|split=" << cfg_.dataset.train_count << "," << cfg_.dataset.test_count
      << "|sub=" << cfg_.dataset.subsample_train << ","
      << cfg_.dataset.subsample_test << "|seed=" << cfg_.seed;
  return key.str();
}

std::string Experiment::matrix_key(double rate) const {
  if (!cfg_.matrix_path.empty())
    return "psi|loaded|ck=" + hex16(file_fnv(cfg_.matrix_path));
  const std::size_t n =
      static_cast<std::size_t>(train_.height) * train_.width;
  const std::size_t m = measurement_count(rate, n);
  const std::uint64_t seed =
      rng::derive_seed(cfg_.seed, "psi-m" + std::to_string(m));
  return "psi|m=" + std::to_string(m) + "|n=" + std::to_string(n) +
         "|seed=" + std::to_string(seed);
}

std::string Experiment::matrix_key(const MeasurementMatrix& psi) const {
  if (psi.provenance().kind == Provenance::Kind::Loaded)
    return "psi|loaded|ck=" + hex16(file_fnv(psi.provenance().path));
  return "psi|m=" + std::to_string(psi.measurements()) +
         "|n=" + std::to_string(psi.signal_dim()) +
         "|seed=" + std::to_string(psi.provenance().seed);
}

std::vector<double> Experiment::effective_rates() {
  if (cfg_.matrix_path.empty()) return cfg_.rates;
  return {MeasurementMatrix::load(cfg_.matrix_path).rate()};
}

MeasurementMatrix Experiment::measurement_matrix(double rate) {
  if (!cfg_.matrix_path.empty())
    return MeasurementMatrix::load(cfg_.matrix_path);

  const std::size_t n =
      static_cast<std::size_t>(train_.height) * train_.width;
  const std::size_t m = measurement_count(rate, n);
  const std::uint64_t seed =
      rng::derive_seed(cfg_.seed, "psi-m" + std::to_string(m));

  fs::create_directories(cache_dir());
  const std::string path =
      cache_dir() + "/psi_" + hex16(rng::fnv1a(matrix_key(rate))) + ".psimat";
  Provenance prov;
  prov.kind = Provenance::Kind::Random;
  prov.seed = seed;
  prov.variance = 1.0 / static_cast<double>(m);
  if (fs::exists(path)) {
    try {
      MeasurementMatrix cached = MeasurementMatrix::load(path);
      if (cached.measurements() == static_cast<Eigen::Index>(m) &&
          cached.signal_dim() == static_cast<Eigen::Index>(n))
        return MeasurementMatrix::from_entries(cached.entries(), prov);
      std::cerr << "warning: cached matrix " << path
                << " has stale dimensions; rebuilding\n";
    } catch (const Error& e) {
      std::cerr << "warning: unusable cached matrix " << path << " ("
                << e.what() << "); rebuilding\n";
    }
  }
  MeasurementMatrix psi = MeasurementMatrix::generate(
      static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n), seed);
  psi.save(path, MeasurementMatrix::SaveFormat::Binary);
  return psi;
}

std::vector<Eigen::MatrixXd> Experiment::proxies(const MeasurementMatrix& psi,
                                                 Part part) const {
  return proxy_batch(part == Part::Train ? train_.images : test_.images, psi);
}

std::string Experiment::descriptor_key(const MeasurementMatrix& psi,
                                       Part part) const {
  const ScaleConfig sc = cfg_.scale_config();
  std::ostringstream key;
  key << "desc|" << matrix_key(psi) << "|" << dataset_key()
      << "|part=" << (part == Part::Train ? "train" : "test")
      << "|stride=" << cfg_.descriptor.stride
      << "|sizes=" << join_ints(sc.block_sizes)
      << "|counts=" << join_ints(sc.coeff_counts);
  return key.str();
}

DescriptorSet Experiment::descriptors(const MeasurementMatrix& psi,
                                      Part part) {
  const ScaleConfig sc = cfg_.scale_config();
  const ImageSet& images = part == Part::Train ? train_ : test_;
  const KeypointGrid grid = KeypointGrid::regular(images.height, images.width,
                                                  cfg_.descriptor.stride);
  fs::create_directories(cache_dir());
  const std::string path =
      cache_dir() + "/desc_" +
      hex16(rng::fnv1a(descriptor_key(psi, part))) + ".mbdct";
  if (fs::exists(path)) {
    try {
      DescriptorSet cached = load_descriptors(path);
      if (cached.n_images == images.size() &&
          cached.per_image == grid.points.size() &&
          cached.cfg.block_sizes == sc.block_sizes &&
          cached.cfg.coeff_counts == sc.coeff_counts) {
        cached.cfg.energy = sc.energy;
        cached.stride = grid.stride;
        return cached;
      }
      std::cerr << "warning: cached descriptors " << path
                << " do not match the config; rebuilding\n";
    } catch (const Error& e) {
      std::cerr << "warning: unusable descriptor cache " << path << " ("
                << e.what() << "); rebuilding\n";
    }
  }
  const std::vector<Eigen::MatrixXd> prox = proxies(psi, part);
  DescriptorSet set = describe_all(prox, grid, sc);
  save_descriptors(set, path);
  return set;
}

std::string Experiment::codebook_key(const MeasurementMatrix& psi) const {
  std::ostringstream key;
  key << "cbook|" << descriptor_key(psi, Part::Train)
      << "|k=" << cfg_.codebook.k << "|iters=" << cfg_.codebook.max_iters
      << "|sample=" << cfg_.codebook.sample_images
      << "|dseed=" << rng::derive_seed(cfg_.seed, "dict-sample")
      << "|kseed=" << rng::derive_seed(cfg_.seed, "kmeans");
  return key.str();
}

Codebook Experiment::train_codebook(const MeasurementMatrix& psi) {
  fs::create_directories(cache_dir());
  const std::string path =
      cache_dir() + "/cbook_" + hex16(rng::fnv1a(codebook_key(psi))) + ".cbook";
  const ScaleConfig sc = cfg_.scale_config();
  if (fs::exists(path)) {
    try {
      Codebook cached = load_codebook(path);
      if (cached.k() == static_cast<std::size_t>(cfg_.codebook.k) &&
          cached.bit_length() == static_cast<std::size_t>(sc.total_bits()))
        return cached;
      std::cerr << "warning: cached codebook " << path
                << " does not match the config; rebuilding\n";
    } catch (const Error& e) {
      std::cerr << "warning: unusable codebook cache " << path << " ("
                << e.what() << "); rebuilding\n";
    }
  }

  const DescriptorSet train_desc = descriptors(psi, Part::Train);
  const std::size_t sample = std::min<std::size_t>(
      static_cast<std::size_t>(cfg_.codebook.sample_images), train_.size());
  const auto picks = rng::sample_indices(
      train_.size(), sample, rng::derive_seed(cfg_.seed, "dict-sample"));
  BitMatrix pool(sample * train_desc.per_image, train_desc.bits.bits());
  for (std::size_t s = 0; s < picks.size(); ++s)
    for (std::size_t i = 0; i < train_desc.per_image; ++i)
      pool.set_row(s * train_desc.per_image + i,
                   train_desc.bits.row(picks[s] * train_desc.per_image + i));
  if (pool.rows() < static_cast<std::size_t>(cfg_.codebook.k))
    throw ArgumentError(
        "codebook: dictionary sample yields " + std::to_string(pool.rows()) +
        " descriptors for k=" + std::to_string(cfg_.codebook.k) +
        "; increase sample_images or lower k");

  Codebook book =
      kmeans_hamming(pool, static_cast<std::size_t>(cfg_.codebook.k),
                     rng::derive_seed(cfg_.seed, "kmeans"),
                     cfg_.codebook.max_iters);
  book.sample_source = std::to_string(sample) + " train proxies";
  save_codebook(book, path);
  return book;
}

std::vector<FeatureVector> Experiment::bow_features(
    const MeasurementMatrix& psi, Part part) {
  const ImageSet& images = part == Part::Train ? train_ : test_;
  const Codebook book = train_codebook(psi);
  fs::create_directories(cache_dir());
  const std::string key = "feat|bow|" + codebook_key(psi) + "|" +
                          descriptor_key(psi, part);
  const std::string path =
      cache_dir() + "/feat_" + hex16(rng::fnv1a(key)) + ".feat";
  if (fs::exists(path)) {
    try {
      std::vector<FeatureVector> cached = load_features(path);
      if (cached.size() == images.size() &&
          (cached.empty() ||
           cached.front().values.size() ==
               static_cast<Eigen::Index>(book.k()))) {
        for (std::size_t i = 0; i < cached.size(); ++i) {
          cached[i].label = images.labels[i];
          cached[i].kind = FeatureKind::Bow;
        }
        return cached;
      }
      std::cerr << "warning: cached features " << path
                << " do not match the config; rebuilding\n";
    } catch (const Error& e) {
      std::cerr << "warning: unusable feature cache " << path << " ("
                << e.what() << "); rebuilding\n";
    }
  }

  const DescriptorSet desc = descriptors(psi, part);
  std::vector<FeatureVector> features(images.size());
  parallel_for(0, images.size(), [&](std::size_t i) {
    features[i].values = encode_bow(desc.bits, i * desc.per_image,
                                    (i + 1) * desc.per_image, book);
    features[i].label = images.labels[i];
    features[i].kind = FeatureKind::Bow;
  });
  save_features(features, path);
  return features;
}

std::vector<EvalReport> Experiment::classify_rate(
    const MeasurementMatrix& psi) {
  return classify_rate(psi, psi.rate());
}

std::vector<EvalReport> Experiment::classify_rate(const MeasurementMatrix& psi,
                                                  double nominal_rate) {
  std::vector<FeatureVector> bow_train = bow_features(psi, Part::Train);
  std::vector<FeatureVector> bow_test = bow_features(psi, Part::Test);

  auto classify = [&](const std::vector<FeatureVector>& tr,
                      const std::vector<FeatureVector>& te,
                      FeatureKind kind) {
    const int k = cross_validate_k(tr, cfg_.classifier.k_grid,
                                   cfg_.classifier.folds,
                                   rng::derive_seed(cfg_.seed, "cv-folds"));
    EvalReport report = evaluate(KnnModel(tr, k), te);
    report.measurement_rate = nominal_rate;
    report.energy = to_string(cfg_.scale_config().energy);
    report.feature_kind = to_string(kind);
    report.sensing = psi.provenance().describe();
    report.seed = cfg_.seed;
    return report;
  };

  std::vector<EvalReport> reports;
  reports.push_back(classify(bow_train, bow_test, FeatureKind::Bow));

  if (!external_train_.empty()) {
    std::vector<FeatureVector> fused_train(bow_train.size());
    for (std::size_t i = 0; i < bow_train.size(); ++i)
      fused_train[i] = fuse(bow_train[i], external_train_[i]);
    std::vector<FeatureVector> fused_test(bow_test.size());
    for (std::size_t i = 0; i < bow_test.size(); ++i)
      fused_test[i] = fuse(bow_test[i], external_test_[i]);
    reports.push_back(classify(fused_train, fused_test, FeatureKind::Fused));
  }
  return reports;
}

std::vector<int> Experiment::calibrate(std::optional<double> rate,
                                       double energy,
                                       std::size_t sample_size) {
  const std::uint64_t seed = rng::derive_seed(cfg_.seed, "calibration");
  if (rate) {
    const MeasurementMatrix psi = measurement_matrix(*rate);
    const std::vector<Eigen::MatrixXd> prox = proxies(psi, Part::Train);
    return calibrate_counts(prox, cfg_.descriptor.block_sizes, energy,
                            sample_size, cfg_.descriptor.stride, seed);
  }
  return calibrate_counts(train_.images, cfg_.descriptor.block_sizes, energy,
                          sample_size, cfg_.descriptor.stride, seed);
}

std::vector<EvalReport> Experiment::run() {
  std::vector<EvalReport> reports;
  for (double rate : effective_rates()) {
    try {
      const MeasurementMatrix psi = measurement_matrix(rate);
      auto rate_reports = classify_rate(psi, rate);
      reports.insert(reports.end(), rate_reports.begin(), rate_reports.end());
    } catch (const Error& e) {
      throw Error("rate " + fmt("%.6g", rate) + ": " + e.what());
    }
  }
  write_reports(reports);
  return reports;
}

void Experiment::write_reports(std::span<const EvalReport> reports) const {
  fs::create_directories(cfg_.out_dir);
  {
    std::ofstream out(cfg_.out_dir + "/records.tsv", std::ios::binary);
    if (!out) throw IoError("cannot write " + cfg_.out_dir + "/records.tsv");
    out << report_records(reports);
  }
  std::ofstream out(cfg_.out_dir + "/report.txt", std::ios::binary);
  if (!out) throw IoError("cannot write " + cfg_.out_dir + "/report.txt");
  out << "csproxy experiment report\n";
  out << "config: " << config_json(cfg_) << "\n";
  out << "dataset: " << train_.source << " checksum=" << hex16(train_.checksum)
      << " train=" << train_.size() << " test=" << test_.size() << "\n\n";
  out << report_table(reports) << "\n";
  for (const auto& r : reports) {
    out << "-- rate=" << fmt("%.6g", r.measurement_rate)
        << " kind=" << r.feature_kind << " --\n";
    out << "sensing: " << r.sensing << "\n";
    out << "energy: " << r.energy << "  k: " << r.k << "  seed: " << r.seed
        << "\n";
    const int total = r.confusion.sum();
    const int correct = r.confusion.trace();
    out << "error rate: " << fmt("%.4f%%", r.error_rate * 100.0) << " ("
        << (total - correct) << " of " << total << ")\n";
    out << "confusion (rows true, cols predicted):\n";
    for (Eigen::Index row = 0; row < r.confusion.rows(); ++row) {
      for (Eigen::Index col = 0; col < r.confusion.cols(); ++col)
        out << (col ? " " : "") << r.confusion(row, col);
      out << "\n";
    }
    out << "\n";
  }
}

}  // namespace csproxy
