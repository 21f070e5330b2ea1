#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>

#include "csproxy/codebook.hpp"
#include "csproxy/errors.hpp"
#include "csproxy/rng.hpp"
#include "support.hpp"

using namespace csproxy;
using testsupport::TempDir;

namespace {

BitMatrix random_bits(std::size_t rows, std::size_t bits, std::uint64_t seed) {
  rng::Generator gen(seed);
  BitMatrix m(rows, bits);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t b = 0; b < bits; ++b)
      m.set(r, b, gen.next_unit() < 0.5);
  return m;
}

std::size_t naive_hamming(BitView a, BitView b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.nbits; ++i)
    if (a.get(i) != b.get(i)) ++d;
  return d;
}

// Majority pattern of a subset of rows (ties -> 1), plus its Hamming cost.
std::pair<BitVec, std::size_t> majority(const BitMatrix& rows,
                                        const std::vector<std::size_t>& members) {
  BitVec center(rows.bits());
  for (std::size_t b = 0; b < rows.bits(); ++b) {
    std::size_t ones = 0;
    for (std::size_t r : members) ones += rows.get(r, b);
    center.set(b, 2 * ones >= members.size());
  }
  std::size_t cost = 0;
  for (std::size_t r : members) cost += hamming(rows.row(r), center);
  return {center, cost};
}

}  // namespace

TEST_CASE("hamming distance") {
  BitVec a(4), b(4);
  CHECK(hamming(a, a) == 0);
  for (int i = 0; i < 4; ++i) b.set(i, true);
  CHECK(hamming(a, b) == 4);

  const BitMatrix pair = random_bits(2, 273, 5);
  CHECK(hamming(pair.row(0), pair.row(1)) ==
        naive_hamming(pair.row(0), pair.row(1)));

  BitVec c(5);
  CHECK_THROWS_AS(hamming(a, c), ArgumentError);
}

TEST_CASE("kmeans with k == n pins every distinct descriptor") {
  BitMatrix rows(4, 16);
  for (std::size_t r = 0; r < 4; ++r) rows.set(r, r * 3, true);  // distinct
  KMeansTrace trace;
  const Codebook book = kmeans_hamming(rows, 4, 9, 100, &trace);
  REQUIRE(book.k() == 4);
  CHECK(trace.inertia.back() == 0);
  // every input pattern appears exactly once among the centroids
  std::set<std::size_t> matched;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 4; ++j)
      if (hamming(rows.row(r), book.centroids.row(j)) == 0) matched.insert(j);
  CHECK(matched.size() == 4);
}

TEST_CASE("kmeans recovers two separated blobs") {
  rng::Generator gen(31);
  const std::size_t bits = 64, per_blob = 20;
  BitMatrix rows(2 * per_blob, bits);
  // blob A ~ all zeros, blob B ~ all ones, each member <= 2 flipped bits
  for (std::size_t r = 0; r < per_blob; ++r) {
    const std::size_t flips = gen.next_below(3);
    for (std::size_t f = 0; f < flips; ++f)
      rows.set(r, gen.next_below(bits), true);
  }
  for (std::size_t r = per_blob; r < 2 * per_blob; ++r) {
    for (std::size_t b = 0; b < bits; ++b) rows.set(r, b, true);
    const std::size_t flips = gen.next_below(3);
    for (std::size_t f = 0; f < flips; ++f)
      rows.set(r, gen.next_below(bits), false);
  }

  const Codebook book = kmeans_hamming(rows, 2, 17, 100);
  REQUIRE(book.k() == 2);

  std::vector<std::size_t> blob_a, blob_b;
  for (std::size_t r = 0; r < per_blob; ++r) blob_a.push_back(r);
  for (std::size_t r = per_blob; r < 2 * per_blob; ++r) blob_b.push_back(r);
  const BitVec maj_a = majority(rows, blob_a).first;
  const BitVec maj_b = majority(rows, blob_b).first;

  const bool direct = hamming(book.centroids.row(0), maj_a) == 0 &&
                      hamming(book.centroids.row(1), maj_b) == 0;
  const bool swapped = hamming(book.centroids.row(0), maj_b) == 0 &&
                       hamming(book.centroids.row(1), maj_a) == 0;
  CHECK((direct || swapped));
}

TEST_CASE("kmeans is deterministic and its inertia never increases") {
  const BitMatrix rows = random_bits(120, 151, 77);
  KMeansTrace t1, t2;
  const Codebook a = kmeans_hamming(rows, 8, 5, 100, &t1);
  const Codebook b = kmeans_hamming(rows, 8, 5, 100, &t2);
  CHECK(a.centroids == b.centroids);
  CHECK(t1.inertia == t2.inertia);
  REQUIRE(t1.inertia.size() >= 2);
  for (std::size_t i = 1; i < t1.inertia.size(); ++i)
    CHECK(t1.inertia[i] <= t1.inertia[i - 1]);

  CHECK_THROWS_AS(kmeans_hamming(rows, 121, 5, 100), ArgumentError);
  CHECK_THROWS_AS(kmeans_hamming(rows, 0, 5, 100), ArgumentError);
}

TEST_CASE("centroids stay pairwise distinct, even on an early stop") {
  for (int max_iters : {1, 2, 100}) {
    const BitMatrix rows = random_bits(60, 32, 41);  // distinct w.h.p.
    const Codebook book = kmeans_hamming(rows, 12, 3, max_iters);
    for (std::size_t i = 0; i < book.k(); ++i)
      for (std::size_t j = i + 1; j < book.k(); ++j)
        CHECK(hamming(book.centroids.row(i), book.centroids.row(j)) > 0);
  }
}

TEST_CASE("kmeans k=2 reaches the exhaustive optimum within 10 restarts") {
  const std::size_t n = 10;
  const BitMatrix rows = random_bits(n, 16, 123);

  // exhaustive optimum over every 2-partition (majority centroids)
  std::size_t best_cost = std::numeric_limits<std::size_t>::max();
  for (std::uint32_t mask = 1; mask < (1u << n) - 1; ++mask) {
    std::vector<std::size_t> in, out;
    for (std::size_t r = 0; r < n; ++r)
      ((mask >> r) & 1 ? in : out).push_back(r);
    const std::size_t cost = majority(rows, in).second + majority(rows, out).second;
    best_cost = std::min(best_cost, cost);
  }

  std::size_t best_kmeans = std::numeric_limits<std::size_t>::max();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    KMeansTrace trace;
    kmeans_hamming(rows, 2, seed, 100, &trace);
    best_kmeans = std::min(best_kmeans, trace.inertia.back());
  }
  CHECK(best_kmeans == best_cost);
}

TEST_CASE("encode_bow hard-votes and average-pools") {
  SUBCASE("identical descriptors give a one-hot histogram") {
    BitMatrix rows(5, 32);
    for (std::size_t r = 0; r < 5; ++r) rows.set(r, 3, true);
    BitMatrix seeds(3, 32);
    seeds.set(0, 3, true);  // centroid 0 == the pattern
    seeds.set(1, 7, true);
    seeds.set(2, 9, true);
    Codebook book;
    book.centroids = seeds;
    const Eigen::VectorXd h = encode_bow(rows, book);
    CHECK(h[0] == 1.0);
    CHECK(h[1] == 0.0);
    CHECK(h[2] == 0.0);
  }
  SUBCASE("hand-built 4 descriptors over 2 centroids -> [0.75, 0.25]") {
    Codebook book;
    book.centroids = BitMatrix(2, 4);
    for (int b = 0; b < 4; ++b) book.centroids.set(1, b, true);  // 0000, 1111
    BitMatrix rows(4, 4);
    rows.set(1, 3, true);               // 0001 -> c0
    rows.set(2, 1, true);               // 0100 -> c0
    for (int b = 0; b < 4; ++b) rows.set(3, b, true);  // 1111 -> c1
    const Eigen::VectorXd h = encode_bow(rows, book);
    CHECK(h[0] == doctest::Approx(0.75));
    CHECK(h[1] == doctest::Approx(0.25));
  }
  SUBCASE("distance ties vote for the lowest centroid index") {
    Codebook book;
    book.centroids = BitMatrix(2, 4);
    for (int b = 0; b < 4; ++b) book.centroids.set(1, b, true);
    BitMatrix rows(1, 4);
    rows.set(0, 0, true);
    rows.set(0, 1, true);  // 1100: distance 2 to both centroids
    const Eigen::VectorXd h = encode_bow(rows, book);
    CHECK(h[0] == 1.0);
  }
  SUBCASE("histogram is a probability vector, invariant to row order") {
    const BitMatrix rows = random_bits(50, 64, 3);
    Codebook book;
    book.centroids = random_bits(8, 64, 4);
    const Eigen::VectorXd h = encode_bow(rows, book);
    CHECK(h.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.minCoeff() >= 0.0);

    BitMatrix reversed(rows.rows(), rows.bits());
    for (std::size_t r = 0; r < rows.rows(); ++r)
      reversed.set_row(rows.rows() - 1 - r, rows.row(r));
    CHECK(encode_bow(reversed, book) == h);
  }
  SUBCASE("errors") {
    Codebook book;
    book.centroids = random_bits(4, 64, 4);
    CHECK_THROWS_AS(encode_bow(BitMatrix(0, 64), book), ArgumentError);
    CHECK_THROWS_AS(encode_bow(random_bits(3, 32, 1), book), ArgumentError);
  }
}

TEST_CASE("l2_normalize") {
  Eigen::VectorXd v(2);
  v << 3, 4;
  const Eigen::VectorXd n = l2_normalize(v);
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));

  const Eigen::VectorXd zero = l2_normalize(Eigen::VectorXd::Zero(5));
  CHECK(zero.isZero(0.0));

  rng::Generator gen(6);
  Eigen::VectorXd r(40);
  for (int i = 0; i < 40; ++i) r[i] = gen.next_gaussian();
  CHECK(l2_normalize(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fuse concatenates L2-normalized halves") {
  FeatureVector a, b;
  a.values = Eigen::VectorXd(2);
  a.values << 1, 0;
  a.kind = FeatureKind::Bow;
  b.values = Eigen::VectorXd(2);
  b.values << 3, 4;

  const FeatureVector f = fuse(a, b);
  CHECK(f.kind == FeatureKind::Fused);
  REQUIRE(f.values.size() == 4);
  CHECK(f.values[0] == 1.0);
  CHECK(f.values[1] == 0.0);
  CHECK(f.values[2] == doctest::Approx(0.6));
  CHECK(f.values[3] == doctest::Approx(0.8));
  CHECK(f.values.head(2).norm() == doctest::Approx(1.0));
  CHECK(f.values.tail(2).norm() == doctest::Approx(1.0));

  SUBCASE("zero half passes through") {
    b.values = Eigen::VectorXd::Zero(3);
    const FeatureVector g = fuse(a, b);
    REQUIRE(g.values.size() == 5);
    CHECK(g.values.tail(3).isZero(0.0));
  }
  SUBCASE("lengths add (512 + 500 = 1012)") {
    FeatureVector big_a, big_b;
    big_a.values = Eigen::VectorXd::Ones(512);
    big_b.values = Eigen::VectorXd::Ones(500);
    CHECK(fuse(big_a, big_b).values.size() == 1012);
  }
  SUBCASE("labels must agree when both present") {
    a.label = 3;
    b.label = 4;
    CHECK_THROWS_AS(fuse(a, b), ConsistencyError);
    b.label = -1;
    CHECK(fuse(a, b).label == 3);
  }
}

TEST_CASE("codebook container round-trips") {
  TempDir tmp;
  Codebook book;
  book.centroids = random_bits(6, 151, 8);
  save_codebook(book, tmp.file("c.cbook"));
  const Codebook loaded = load_codebook(tmp.file("c.cbook"));
  CHECK(loaded.centroids == book.centroids);

  save_codebook(loaded, tmp.file("c2.cbook"));
  CHECK(testsupport::slurp(tmp.file("c.cbook")) ==
        testsupport::slurp(tmp.file("c2.cbook")));

  testsupport::spit(tmp.file("bad"), "CBOOK v1 0 10\n");
  CHECK_THROWS_AS(load_codebook(tmp.file("bad")), FormatError);
}

TEST_CASE("feature container round-trips in both formats") {
  TempDir tmp;
  rng::Generator gen(15);
  std::vector<FeatureVector> features(10);
  for (auto& f : features) {
    f.values = Eigen::VectorXd(7);
    for (int i = 0; i < 7; ++i) f.values[i] = gen.next_gaussian();
  }
  features[0].values[0] = 0.1;  // not exactly representable
  features[0].values[1] = 1e-300;

  for (auto format : {FeatureFileFormat::Binary, FeatureFileFormat::Text}) {
    const std::string path = tmp.file(
        format == FeatureFileFormat::Binary ? "f.bin.feat" : "f.txt.feat");
    save_features(features, path, format);
    const auto loaded = load_external_features(path);
    REQUIRE(loaded.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(loaded[i].kind == FeatureKind::External);
      REQUIRE(loaded[i].values.size() == 7);
      for (int j = 0; j < 7; ++j)
        CHECK(loaded[i].values[j] == features[i].values[j]);  // 0 ULP
    }
  }

  SUBCASE("text rows of differing lengths are rejected") {
    testsupport::spit(tmp.file("bad"), "FEAT v1 2 3 text\n1 2 3\n4 5\n");
    CHECK_THROWS_AS(load_features(tmp.file("bad")), FormatError);
  }
  SUBCASE("truncated binary payload") {
    save_features(features, tmp.file("t.feat"));
    auto bytes = testsupport::slurp(tmp.file("t.feat"));
    bytes.resize(bytes.size() - 4);
    testsupport::spit(tmp.file("t.feat"), bytes);
    CHECK_THROWS_AS(load_features(tmp.file("t.feat")), IoError);
  }
  SUBCASE("bad header") {
    testsupport::spit(tmp.file("bad"), "FEAS v1 2 3\n");
    CHECK_THROWS_AS(load_features(tmp.file("bad")), FormatError);
  }
}
