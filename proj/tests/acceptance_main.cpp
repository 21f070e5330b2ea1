// Acceptance suite: one pass/fail line per criterion, exit code = #failures.
//
// Criteria 3 and 4 need MNIST-format data. By default they run on the
// deterministic synthetic digit corpus; point CSPROXY_MNIST_DIR at a
// directory holding train-images-idx3-ubyte / train-labels-idx1-ubyte to use
// real MNIST. Criterion 5 (full-scale reproduction) only runs when real
// MNIST is available AND CSPROXY_FULLSCALE=1: it takes hours.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "csproxy/classifier.hpp"
#include "csproxy/codebook.hpp"
#include "csproxy/dataset.hpp"
#include "csproxy/descriptor.hpp"
#include "csproxy/errors.hpp"
#include "csproxy/experiment.hpp"
#include "csproxy/rng.hpp"
#include "csproxy/sensing.hpp"
#include "digitgen.hpp"

using namespace csproxy;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok;
  std::string what;
};

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)) {}

  void expect(bool ok, const std::string& what) {
    checks_.push_back({ok, what});
  }
  void note(const std::string& text) { notes_.push_back(text); }
  void skip(const std::string& why) { skip_reason_ = why; }

  bool failed() const {
    if (skip_reason_) return false;
    return std::any_of(checks_.begin(), checks_.end(),
                       [](const Check& c) { return !c.ok; });
  }

  void print() const {
    if (skip_reason_) {
      std::cout << "[SKIP] " << name_ << " — " << *skip_reason_ << "\n";
      return;
    }
    std::cout << (failed() ? "[FAIL] " : "[PASS] ") << name_ << "\n";
    for (const Check& c : checks_)
      if (!c.ok) std::cout << "       failed: " << c.what << "\n";
    for (const std::string& n : notes_) std::cout << "       note: " << n << "\n";
  }

 private:
  std::string name_;
  std::vector<Check> checks_;
  std::vector<std::string> notes_;
  std::optional<std::string> skip_reason_;
};

std::string fmt_pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
  return buf;
}

std::string join(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + std::to_string(v[i]);
  return s + "]";
}

// ---- shared data ---------------------------------------------------------

struct Corpus {
  std::string images;
  std::string labels;
  bool real_mnist = false;
  std::size_t available = 0;
};

Corpus prepare_corpus(const std::string& dir) {
  Corpus corpus;
  if (const char* env = std::getenv("CSPROXY_MNIST_DIR")) {
    const std::string images = std::string(env) + "/train-images-idx3-ubyte";
    const std::string labels = std::string(env) + "/train-labels-idx1-ubyte";
    if (fs::exists(images) && fs::exists(labels)) {
      corpus.images = images;
      corpus.labels = labels;
      corpus.real_mnist = true;
      corpus.available = load_idx(images, labels).size();
      return corpus;
    }
    std::cerr << "CSPROXY_MNIST_DIR is set but IDX files are missing; "
                 "falling back to the synthetic corpus\n";
  }
  corpus.images = dir + "/digits-images.idx";
  corpus.labels = dir + "/digits-labels.idx";
  corpus.available = 60000;
  std::cerr << "generating synthetic corpus (60000 digits)...\n";
  save_idx(digitgen::generate(corpus.available, 20240424), corpus.images,
           corpus.labels);
  return corpus;
}

ExperimentConfig base_config(const Corpus& corpus, const std::string& out) {
  ExperimentConfig cfg;
  cfg.dataset.images = corpus.images;
  cfg.dataset.labels = corpus.labels;
  cfg.dataset.train_count = 50000;
  cfg.dataset.test_count = 10000;
  cfg.seed = 1;
  cfg.out_dir = out;
  return cfg;
}

// ---- oracles -------------------------------------------------------------

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  rng::Generator gen(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = gen.next_gaussian();
  return m;
}

int oracle_knn(const std::vector<FeatureVector>& train,
               const Eigen::VectorXd& query, int k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < train.size(); ++i)
    d.emplace_back(chi_square(train[i].values, query), i);
  std::sort(d.begin(), d.end());
  std::map<int, std::pair<int, double>> tally;
  for (int i = 0; i < k; ++i) {
    auto& t = tally[train[d[i].second].label];
    t.first += 1;
    t.second += d[i].first;
  }
  int best = -1;
  int best_count = -1;
  double best_sum = 0.0;
  for (const auto& [label, t] : tally)
    if (t.first > best_count ||
        (t.first == best_count && t.second < best_sum)) {
      best = label;
      best_count = t.first;
      best_sum = t.second;
    }
  return best;
}

// ---- criteria ------------------------------------------------------------

Criterion criterion_properties() {
  Criterion crit("criterion 1: property suite");

  for (int b : {8, 12, 16, 24}) {
    const Eigen::MatrixXd x = random_matrix(b, b, 100 + b);
    const Eigen::MatrixXd coeffs = dct2(x);
    crit.expect(std::abs(coeffs.squaredNorm() - x.squaredNorm()) <=
                    1e-9 * x.squaredNorm(),
                "Parseval at block size " + std::to_string(b));
    crit.expect((idct2(coeffs) - x).norm() <= 1e-9 * x.norm(),
                "DCT inverse at block size " + std::to_string(b));
  }

  for (int b = 1; b <= 24; ++b) {
    const auto& z = zigzag_order(b);
    std::set<std::pair<int, int>> seen(z.begin(), z.end());
    crit.expect(seen.size() == static_cast<std::size_t>(b) * b &&
                    z.front() == std::pair<int, int>{0, 0},
                "zig-zag bijection at b=" + std::to_string(b));
  }

  {
    const ImageSet digits = digitgen::generate(4, 7);
    const auto cfg = ScaleConfig::preset(EnergyLevel::E95);
    bool invariant = true;
    for (const auto& img : digits.images) {
      const auto a = describe_point(img, 13, 11, cfg);
      const auto b = describe_point((img.array() + 0.29).matrix(), 13, 11, cfg);
      invariant = invariant && a.bits == b.bits;
    }
    crit.expect(invariant, "brightness-shift invariance of the descriptor");
  }

  {
    rng::Generator gen(3);
    BitMatrix rows(300, 151);
    for (std::size_t r = 0; r < rows.rows(); ++r)
      for (std::size_t b = 0; b < rows.bits(); ++b)
        rows.set(r, b, gen.next_unit() < 0.4);
    KMeansTrace trace;
    const Codebook book = kmeans_hamming(rows, 16, 5, 100, &trace);
    bool monotone = true;
    for (std::size_t i = 1; i < trace.inertia.size(); ++i)
      monotone = monotone && trace.inertia[i] <= trace.inertia[i - 1];
    crit.expect(monotone, "k-means inertia is non-increasing");

    const Eigen::VectorXd h = encode_bow(rows, book);
    crit.expect(std::abs(h.sum() - 1.0) <= 1e-12 && h.minCoeff() >= 0.0,
                "BoW histogram sums to 1");
  }

  {
    rng::Generator gen(9);
    bool metric = true;
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd a(8), b(8);
      for (int i = 0; i < 8; ++i) {
        a[i] = gen.next_unit();
        b[i] = gen.next_unit();
      }
      metric = metric && chi_square(a, b) == chi_square(b, a) &&
               chi_square(a, b) > 0.0 && chi_square(a, a) == 0.0;
    }
    crit.expect(metric, "chi-square symmetry / positivity / identity");
  }

  {
    rng::Generator gen(11);
    std::vector<FeatureVector> train(200);
    for (auto& f : train) {
      f.values = Eigen::VectorXd(8);
      for (int i = 0; i < 8; ++i) f.values[i] = gen.next_unit();
      f.values /= f.values.sum();
      f.label = static_cast<int>(gen.next_below(10));
    }
    bool agree = true;
    for (int k : {1, 3, 5}) {
      const KnnModel model(train, k);
      for (int q = 0; q < 25; ++q) {
        Eigen::VectorXd query(8);
        for (int i = 0; i < 8; ++i) query[i] = gen.next_unit();
        query /= query.sum();
        agree = agree && knn_predict(model, query) ==
                             oracle_knn(train, query, k);
      }
    }
    crit.expect(agree, "KNN matches the brute-force oracle (200 points)");
  }

  {
    const std::string dir = fs::temp_directory_path() / "csproxy-acc-rt";
    fs::create_directories(dir);
    bool round_trips = true;

    const ImageSet digits = digitgen::generate(6, 31);
    save_idx(digits, dir + "/i.idx", dir + "/l.idx");
    const ImageSet digits2 = load_idx(dir + "/i.idx", dir + "/l.idx");
    save_idx(digits2, dir + "/i2.idx", dir + "/l2.idx");
    auto slurp = [](const std::string& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    };
    round_trips = round_trips && slurp(dir + "/i.idx") == slurp(dir + "/i2.idx");

    const auto psi = MeasurementMatrix::generate(6, 12, 3);
    psi.save(dir + "/m.txt", MeasurementMatrix::SaveFormat::Text);
    psi.save(dir + "/m.bin", MeasurementMatrix::SaveFormat::Binary);
    const auto mt = MeasurementMatrix::load(dir + "/m.txt");
    const auto mb = MeasurementMatrix::load(dir + "/m.bin");
    round_trips = round_trips && mt.entries() == psi.entries() &&
                  mb.entries() == psi.entries();

    const auto cfg = ScaleConfig::preset(EnergyLevel::E90);
    const auto set = describe_all(digits.images,
                                  KeypointGrid::regular(28, 28, 7), cfg);
    save_descriptors(set, dir + "/d.mbdct");
    round_trips =
        round_trips && load_descriptors(dir + "/d.mbdct").bits == set.bits;

    rng::Generator gen(8);
    BitMatrix pool(40, 151);
    for (std::size_t r = 0; r < 40; ++r)
      for (std::size_t b = 0; b < 151; ++b)
        pool.set(r, b, gen.next_unit() < 0.5);
    const Codebook book = kmeans_hamming(pool, 8, 1, 50);
    save_codebook(book, dir + "/c.cbook");
    round_trips = round_trips &&
                  load_codebook(dir + "/c.cbook").centroids == book.centroids;

    std::vector<FeatureVector> feats(5);
    for (auto& f : feats) {
      f.values = Eigen::VectorXd(9);
      for (int i = 0; i < 9; ++i) f.values[i] = gen.next_gaussian();
    }
    bool feat_ok = true;
    for (auto format : {FeatureFileFormat::Binary, FeatureFileFormat::Text}) {
      save_features(feats, dir + "/f.feat", format);
      const auto loaded = load_features(dir + "/f.feat");
      for (std::size_t i = 0; i < feats.size(); ++i)
        feat_ok = feat_ok && loaded[i].values == feats[i].values;
    }
    crit.expect(round_trips && feat_ok,
                "containers round-trip bit-exactly (IDX, PSIMAT, MBDCT, "
                "CBOOK, FEAT)");
    fs::remove_all(dir);
  }
  return crit;
}

Criterion criterion_sensing_stats() {
  Criterion crit("criterion 2: sensing statistics");

  Eigen::MatrixXd average = Eigen::MatrixXd::Zero(16, 16);
  for (int trial = 0; trial < 200; ++trial) {
    const auto psi = MeasurementMatrix::generate(8, 16, 5000 + trial);
    average += psi.entries().transpose() * psi.entries();
  }
  average /= 200.0;
  const double worst =
      (average - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff();
  crit.expect(worst < 0.1, "Monte-Carlo mean of Psi^T Psi vs identity "
                           "(max deviation " + std::to_string(worst) + ")");

  const auto psi = MeasurementMatrix::generate(196, 784, 1);
  const double mean = psi.entries().mean();
  const double var = (psi.entries().array() - mean).square().mean();
  crit.expect(var > 0.9 / 196.0 && var < 1.1 / 196.0,
              "entry variance within 10% of 1/m (got " + std::to_string(var) +
                  ", want ~" + std::to_string(1.0 / 196.0) + ")");
  return crit;
}

Criterion criterion_calibration(const Corpus& corpus, const std::string& out) {
  Criterion crit("criterion 3: calibration plausibility");
  ExperimentConfig cfg = base_config(corpus, out);
  cfg.rates = {0.25};
  Experiment experiment(cfg);

  const std::vector<int> expected90{15, 26, 37, 73};
  const std::vector<int> expected95{21, 40, 63, 130};

  const auto c90 = experiment.calibrate(0.25, 0.90, 100);
  const auto c95 = experiment.calibrate(0.25, 0.95, 100);

  auto within = [](const std::vector<int>& got, const std::vector<int>& want) {
    for (std::size_t i = 0; i < want.size(); ++i)
      if (got[i] < 0.8 * want[i] || got[i] > 1.2 * want[i]) return false;
    return true;
  };
  crit.expect(within(c90, expected90),
              "proxy-calibrated 90% counts " + join(c90) + " within ±20% of " +
                  join(expected90));
  crit.expect(within(c95, expected95),
              "proxy-calibrated 95% counts " + join(c95) + " within ±20% of " +
                  join(expected95));
  bool monotone = true;
  for (std::size_t i = 0; i < c90.size(); ++i)
    monotone = monotone && c95[i] >= c90[i];
  crit.expect(monotone, "counts monotone in the energy level");

  const auto o90 = experiment.calibrate(std::nullopt, 0.90, 100);
  const auto o95 = experiment.calibrate(std::nullopt, 0.95, 100);
  crit.note("original-image calibration gives " + join(o90) + " (90%) and " +
            join(o95) + " (95%)" +
            (within(o90, expected90) && within(o95, expected95)
                 ? ", both within ±20% of the expected values"
                 : ""));
  crit.note("back-projection noise at rate 0.25 has a flat spectrum, so "
            "proxy-calibrated prefixes land near 86% of each AC set; the "
            "expected budgets match original-image calibration instead");
  return crit;
}

Criterion criterion_desk_pipeline(const Corpus& corpus,
                                  const std::string& out) {
  Criterion crit("criterion 4: desk-scale pipeline");
  ExperimentConfig cfg = base_config(corpus, out);
  cfg.dataset.subsample_train = 5000;
  cfg.dataset.subsample_test = 1000;
  cfg.rates = {0.25, 0.05, 0.01};
  cfg.descriptor.energy = "E100";
  cfg.codebook.k = 512;

  Experiment experiment(cfg);
  const auto reports = experiment.run();

  std::map<double, double> err;
  for (const auto& r : reports) err[r.measurement_rate] = r.error_rate;
  crit.note("errors: 0.25 -> " + fmt_pct(err[0.25]) + ", 0.05 -> " +
            fmt_pct(err[0.05]) + ", 0.01 -> " + fmt_pct(err[0.01]));

  crit.expect(err[0.25] <= 0.15,
              "error at MR=0.25 is " + fmt_pct(err[0.25]) + " (<= 15% wanted)");
  crit.expect(err[0.01] > err[0.05] && err[0.05] > err[0.25],
              "strict degradation ordering err(0.01) > err(0.05) > err(0.25)");
  crit.expect(err[0.01] - err[0.25] >= 0.10,
              "err(0.01) exceeds err(0.25) by " +
                  fmt_pct(err[0.01] - err[0.25]) + " (>= 10 points wanted)");
  return crit;
}

Criterion criterion_fullscale(const Corpus& corpus, const std::string& out) {
  Criterion crit("criterion 5: full-scale reproduction (optional)");
  if (!corpus.real_mnist) {
    crit.skip("needs real MNIST: set CSPROXY_MNIST_DIR");
    return crit;
  }
  const char* flag = std::getenv("CSPROXY_FULLSCALE");
  if (!flag || std::string(flag) != "1") {
    crit.skip("long-running; set CSPROXY_FULLSCALE=1 to enable");
    return crit;
  }

  const std::vector<double> rates{0.25, 0.10, 0.05, 0.01};
  const std::vector<double> table2{0.0726, 0.0946, 0.1428, 0.4133};

  ExperimentConfig cfg = base_config(corpus, out);
  cfg.rates = rates;
  cfg.descriptor.energy = "E100";
  Experiment experiment(cfg);
  const auto reports = experiment.run();
  std::map<double, double> err;
  for (const auto& r : reports) err[r.measurement_rate] = r.error_rate;

  for (std::size_t i = 0; i < rates.size(); ++i) {
    std::ostringstream what;
    what << "MR=" << rates[i] << ": " << fmt_pct(err[rates[i]])
         << " vs published " << fmt_pct(table2[i]) << " (±2 points)";
    crit.expect(std::abs(err[rates[i]] - table2[i]) <= 0.02, what.str());
  }

  // energy-level comparison at MR >= 0.05: full AC set best or within 1 point
  for (double rate : {0.25, 0.10, 0.05}) {
    std::map<std::string, double> by_energy;
    for (const char* energy : {"E90", "E95", "E100"}) {
      ExperimentConfig ecfg = base_config(corpus, out + "-" + energy);
      ecfg.rates = {rate};
      ecfg.descriptor.energy = energy;
      Experiment run(ecfg);
      by_energy[energy] = run.run().front().error_rate;
    }
    const double best = std::min({by_energy["E90"], by_energy["E95"],
                                  by_energy["E100"]});
    std::ostringstream what;
    what << "energy sweep at MR=" << rate << ": E100 "
         << fmt_pct(by_energy["E100"]) << " vs best " << fmt_pct(best)
         << " (within 1 point)";
    crit.expect(by_energy["E100"] <= best + 0.01, what.str());
  }
  return crit;
}

Criterion criterion_fusion(const std::string& dir) {
  Criterion crit("criterion 6: fusion mechanics");

  const ImageSet digits = digitgen::generate(250, 55);
  save_idx(digits, dir + "/fi.idx", dir + "/fl.idx");

  rng::Generator gen(77);
  auto make_external = [&](std::size_t n, const std::string& path) {
    std::vector<FeatureVector> fs(n);
    for (auto& f : fs) {
      f.values = Eigen::VectorXd(20);
      for (int i = 0; i < 20; ++i) f.values[i] = gen.next_gaussian();
    }
    save_features(fs, path);
  };
  make_external(200, dir + "/ext-train.feat");
  make_external(50, dir + "/ext-test.feat");

  ExperimentConfig cfg;
  cfg.dataset.images = dir + "/fi.idx";
  cfg.dataset.labels = dir + "/fl.idx";
  cfg.dataset.train_count = 200;
  cfg.dataset.test_count = 50;
  cfg.rates = {0.25};
  cfg.descriptor.energy = "E90";
  cfg.descriptor.stride = 4;
  cfg.codebook.k = 32;
  cfg.codebook.sample_images = 50;
  cfg.classifier.k_grid = {1, 3};
  cfg.classifier.folds = 4;
  cfg.external_train_features = dir + "/ext-train.feat";
  cfg.external_test_features = dir + "/ext-test.feat";
  cfg.out_dir = dir + "/fusion-out";

  Experiment experiment(cfg);
  const auto psi = experiment.measurement_matrix(0.25);
  const auto bow = experiment.bow_features(psi, Experiment::Part::Train);
  const auto ext = load_features(dir + "/ext-train.feat");
  const FeatureVector fused = fuse(bow[0], ext[0]);
  crit.expect(fused.values.size() ==
                  bow[0].values.size() + ext[0].values.size(),
              "fused length is additive");
  const double head = fused.values.head(bow[0].values.size()).norm();
  const double tail = fused.values.tail(ext[0].values.size()).norm();
  auto unit_or_zero = [](double n) {
    return n == 0.0 || std::abs(n - 1.0) <= 1e-12;
  };
  crit.expect(unit_or_zero(head) && unit_or_zero(tail),
              "each fused half is unit-norm (or zero)");

  const auto reports = experiment.run();
  bool has_fused = false;
  for (const auto& r : reports)
    if (r.feature_kind == "fused") {
      has_fused = true;
      crit.expect(r.error_rate >= 0.0 && r.error_rate <= 1.0 &&
                      r.confusion.sum() == 50,
                  "fused KNN run yields a valid report");
    }
  crit.expect(has_fused, "a fused report is produced");
  crit.note("published fused error rates depend on externally trained CNN "
            "features and are out of scope here");
  return crit;
}

Criterion criterion_determinism(const std::string& dir) {
  Criterion crit("criterion 7: determinism");

  const ImageSet digits = digitgen::generate(220, 91);
  save_idx(digits, dir + "/di.idx", dir + "/dl.idx");

  auto run_once = [&](const std::string& out) {
    ExperimentConfig cfg;
    cfg.dataset.images = dir + "/di.idx";
    cfg.dataset.labels = dir + "/dl.idx";
    cfg.dataset.train_count = 180;
    cfg.dataset.test_count = 40;
    cfg.rates = {0.25, 0.05};
    cfg.descriptor.energy = "E90";
    cfg.descriptor.stride = 4;
    cfg.codebook.k = 24;
    cfg.codebook.sample_images = 60;
    cfg.classifier.k_grid = {1, 3};
    cfg.classifier.folds = 4;
    cfg.out_dir = out;
    Experiment experiment(cfg);
    experiment.run();
    std::ifstream in(out + "/records.tsv", std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };

  const std::string a = run_once(dir + "/det-a");
  const std::string b = run_once(dir + "/det-b");
  crit.expect(!a.empty() && a == b,
              "two runs of one config produce byte-identical records");
  return crit;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
  }

  const std::string work =
      (fs::temp_directory_path() /
       ("csproxy-acceptance" + (only ? "-" + std::to_string(only) : "")))
          .string();
  fs::remove_all(work);
  fs::create_directories(work);

  std::vector<Criterion> results;
  try {
    Corpus corpus;
    const bool data_needed = only == 0 || only == 3 || only == 4;
    if (data_needed ||
        (only == 5 && std::getenv("CSPROXY_MNIST_DIR") != nullptr))
      corpus = prepare_corpus(work);

    auto wanted = [&](int n) { return only == 0 || only == n; };
    if (wanted(1)) results.push_back(criterion_properties());
    if (wanted(2)) results.push_back(criterion_sensing_stats());
    if (wanted(3))
      results.push_back(criterion_calibration(corpus, work + "/calib"));
    if (wanted(4))
      results.push_back(criterion_desk_pipeline(corpus, work + "/desk"));
    if (wanted(5))
      results.push_back(criterion_fullscale(corpus, work + "/full"));
    if (wanted(6)) results.push_back(criterion_fusion(work));
    if (wanted(7)) results.push_back(criterion_determinism(work));
  } catch (const Error& e) {
    std::cerr << "acceptance aborted: " << e.what() << "\n";
    return 99;
  }

  int failures = 0;
  for (const auto& crit : results) {
    crit.print();
    if (crit.failed()) ++failures;
  }
  std::cout << (failures ? "ACCEPTANCE: FAIL (" : "ACCEPTANCE: PASS (")
            << failures << " criterion failures)\n";
  return failures;
}
