#include "csproxy/codebook.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "csproxy/errors.hpp"
#include "csproxy/parallel.hpp"
#include "csproxy/rng.hpp"

namespace csproxy {

namespace {

std::size_t nearest_centroid(BitView x, const BitMatrix& centroids) {
  std::size_t best = 0;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (std::size_t j = 0; j < centroids.rows(); ++j) {
    const std::size_t d = hamming(x, centroids.row(j));
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = j;
    }
  }
  return best;
}

std::uint64_t total_inertia(const BitMatrix& descriptors,
                            const BitMatrix& centroids,
                            const std::vector<std::size_t>& assignment) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < descriptors.rows(); ++i)
    sum += hamming(descriptors.row(i), centroids.row(assignment[i]));
  return sum;
}

}  // namespace

Codebook kmeans_hamming(const BitMatrix& descriptors, std::size_t k,
                        std::uint64_t seed, int max_iters,
                        KMeansTrace* trace) {
  const std::size_t n = descriptors.rows();
  if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
  if (n < k)
    throw ArgumentError("kmeans: " + std::to_string(n) +
                        " descriptors for k=" + std::to_string(k));
  const std::size_t bits = descriptors.bits();

  Codebook book;
  book.seed = seed;
  book.centroids = BitMatrix(k, bits);

  // Forgy init over distinct patterns: shuffle row indices, take the first k
  // whose bit patterns are unseen; duplicate patterns fill any shortfall.
  {
    const auto order = rng::sample_indices(n, n, seed);
    std::vector<std::size_t> chosen;
    std::vector<std::size_t> skipped;
    for (std::size_t idx : order) {
      if (chosen.size() == k) break;
      bool duplicate = false;
      for (std::size_t c : chosen) {
        if (hamming(descriptors.row(idx), descriptors.row(c)) == 0) {
          duplicate = true;
          break;
        }
      }
      (duplicate ? skipped : chosen).push_back(idx);
    }
    for (std::size_t i = 0; chosen.size() < k; ++i)
      chosen.push_back(skipped[i]);
    for (std::size_t j = 0; j < k; ++j)
      book.centroids.set_row(j, descriptors.row(chosen[j]));
  }

  std::vector<std::size_t> assignment(n, 0);
  std::vector<std::size_t> previous(n, std::numeric_limits<std::size_t>::max());
  std::vector<std::size_t> cluster_size(k, 0);

  int iter = 0;
  for (; iter < max_iters; ++iter) {
    parallel_for(0, n, [&](std::size_t i) {
      assignment[i] = nearest_centroid(descriptors.row(i), book.centroids);
    });

    // Empty-cluster repair: hand each empty cluster the descriptor that is
    // currently farthest from its assigned centroid (donors keep >= 1 member,
    // ties resolve to the lowest descriptor index).
    std::fill(cluster_size.begin(), cluster_size.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++cluster_size[assignment[i]];
    for (std::size_t j = 0; j < k; ++j) {
      if (cluster_size[j] != 0) continue;
      std::size_t farthest = std::numeric_limits<std::size_t>::max();
      std::size_t far_d = 0;
      bool found = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (cluster_size[assignment[i]] < 2) continue;
        const std::size_t d =
            hamming(descriptors.row(i), book.centroids.row(assignment[i]));
        if (!found || d > far_d) {
          found = true;
          far_d = d;
          farthest = i;
        }
      }
      if (!found) continue;  // all donors are singletons; cannot repair
      --cluster_size[assignment[farthest]];
      assignment[farthest] = j;
      cluster_size[j] = 1;
      book.centroids.set_row(j, descriptors.row(farthest));
    }

    if (trace)
      trace->inertia.push_back(
          total_inertia(descriptors, book.centroids, assignment));

    if (assignment == previous) break;
    previous = assignment;

    // Majority-vote update; a tied bit becomes 1.
    parallel_for(0, k, [&](std::size_t j) {
      if (cluster_size[j] == 0) return;
      std::vector<std::size_t> ones(bits, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] != j) continue;
        const BitView row = descriptors.row(i);
        for (std::size_t b = 0; b < bits; ++b)
          ones[b] += row.get(b);
      }
      for (std::size_t b = 0; b < bits; ++b)
        book.centroids.set(j, b, 2 * ones[b] >= cluster_size[j]);
    });
  }

  // A max_iters stop can land right after a majority update that collapsed
  // two centroids onto one pattern; converged stops cannot (the repair step
  // would have kept assignments moving). Re-seed any duplicate from the
  // farthest descriptor so centroids stay pairwise distinct whenever the
  // input has at least k distinct patterns.
  for (std::size_t j = 1; j < k; ++j) {
    bool duplicate = false;
    for (std::size_t i = 0; i < j && !duplicate; ++i)
      duplicate = hamming(book.centroids.row(j), book.centroids.row(i)) == 0;
    if (!duplicate) continue;
    std::fill(cluster_size.begin(), cluster_size.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++cluster_size[assignment[i]];
    std::size_t farthest = std::numeric_limits<std::size_t>::max();
    std::size_t far_d = 0;
    bool found = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (assignment[i] != j && cluster_size[assignment[i]] < 2) continue;
      const std::size_t d =
          hamming(descriptors.row(i), book.centroids.row(assignment[i]));
      if (!found || d > far_d) {
        found = true;
        far_d = d;
        farthest = i;
      }
    }
    if (!found) continue;
    assignment[farthest] = j;
    book.centroids.set_row(j, descriptors.row(farthest));
  }

  book.iterations = iter < max_iters ? iter + 1 : max_iters;
  return book;
}

Eigen::VectorXd encode_bow(const BitMatrix& descriptors, std::size_t row_begin,
                           std::size_t row_end, const Codebook& codebook) {
  if (row_begin >= row_end || row_end > descriptors.rows())
    throw ArgumentError("encode_bow: empty descriptor list");
  if (descriptors.bits() != codebook.bit_length())
    throw ArgumentError("encode_bow: descriptor bit length " +
                        std::to_string(descriptors.bits()) +
                        " does not match codebook " +
                        std::to_string(codebook.bit_length()));
  std::vector<std::int64_t> votes(codebook.k(), 0);
  for (std::size_t i = row_begin; i < row_end; ++i)
    ++votes[nearest_centroid(descriptors.row(i), codebook.centroids)];
  Eigen::VectorXd h(static_cast<Eigen::Index>(codebook.k()));
  const double scale = 1.0 / static_cast<double>(row_end - row_begin);
  for (std::size_t j = 0; j < codebook.k(); ++j)
    h[static_cast<Eigen::Index>(j)] = votes[j] * scale;
  return h;
}

Eigen::VectorXd encode_bow(const BitMatrix& descriptors,
                           const Codebook& codebook) {
  return encode_bow(descriptors, 0, descriptors.rows(), codebook);
}

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Bow: return "bow";
    case FeatureKind::External: return "external";
    case FeatureKind::Fused: return "fused";
  }
  return "external";
}

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm > 0.0) return v / norm;
  return v;
}

FeatureVector fuse(const FeatureVector& a, const FeatureVector& b) {
  if (a.label >= 0 && b.label >= 0 && a.label != b.label)
    throw ConsistencyError("fuse: labels disagree (" +
                           std::to_string(a.label) + " vs " +
                           std::to_string(b.label) + ")");
  FeatureVector out;
  out.kind = FeatureKind::Fused;
  out.label = a.label >= 0 ? a.label : b.label;
  out.values.resize(a.values.size() + b.values.size());
  out.values.head(a.values.size()) = l2_normalize(a.values);
  out.values.tail(b.values.size()) = l2_normalize(b.values);
  return out;
}

void save_codebook(const Codebook& codebook, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "CBOOK v1 " << codebook.k() << " " << codebook.bit_length() << "\n";
  const std::size_t row_bytes = (codebook.bit_length() + 7) / 8;
  std::string buf;
  for (std::size_t r = 0; r < codebook.k(); ++r) {
    const BitView row = codebook.centroids.row(r);
    buf.assign(row_bytes, '\0');
    for (std::size_t j = 0; j < row_bytes; ++j)
      buf[j] = static_cast<char>(
          static_cast<std::uint8_t>(row.words[j >> 3] >> ((j & 7) * 8)));
    out.write(buf.data(), static_cast<std::streamsize>(row_bytes));
  }
  if (!out) throw IoError("write failed: " + path);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("truncated file: " + path);
  std::istringstream hs(header);
  std::string tag, version;
  std::size_t k = 0, bits = 0;
  hs >> tag >> version >> k >> bits;
  if (tag != "CBOOK" || version != "v1" || hs.fail() || k < 1 || bits < 1)
    throw FormatError(path + ": bad CBOOK header '" + header + "'");
  Codebook book;
  book.centroids = BitMatrix(k, bits);
  const std::size_t row_bytes = (bits + 7) / 8;
  std::string buf(row_bytes, '\0');
  for (std::size_t r = 0; r < k; ++r) {
    in.read(buf.data(), static_cast<std::streamsize>(row_bytes));
    if (static_cast<std::size_t>(in.gcount()) != row_bytes)
      throw IoError("truncated file: " + path);
    book.centroids.set_row(
        r, BitVec::from_bytes(
               bits, reinterpret_cast<const std::uint8_t*>(buf.data()),
               row_bytes));
  }
  return book;
}

void save_features(const std::vector<FeatureVector>& features,
                   const std::string& path, FeatureFileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const std::size_t count = features.size();
  const Eigen::Index dim = count ? features.front().values.size() : 0;
  for (const auto& f : features)
    if (f.values.size() != dim)
      throw ArgumentError("save_features: rows have differing lengths");
  if (format == FeatureFileFormat::Text) {
    out << "FEAT v1 " << count << " " << dim << " text\n";
    char buf[40];
    for (const auto& f : features) {
      for (Eigen::Index i = 0; i < dim; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", f.values[i]);
        if (i) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  } else {
    out << "FEAT v1 " << count << " " << dim << "\n";
    std::string block;
    block.reserve(count * static_cast<std::size_t>(dim) * 8);
    for (const auto& f : features)
      for (Eigen::Index i = 0; i < dim; ++i) {
        std::uint64_t u;
        const double v = f.values[i];
        std::memcpy(&u, &v, 8);
        for (int byte = 0; byte < 8; ++byte)
          block.push_back(static_cast<char>((u >> (8 * byte)) & 0xFF));
      }
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<FeatureVector> load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("truncated file: " + path);
  std::istringstream hs(header);
  std::string tag, version, mode;
  std::size_t count = 0;
  Eigen::Index dim = 0;
  hs >> tag >> version >> count >> dim;
  if (tag != "FEAT" || version != "v1" || hs.fail() || dim < 0)
    throw FormatError(path + ": bad FEAT header '" + header + "'");
  hs >> mode;

  std::vector<FeatureVector> out(count);
  if (mode == "text") {
    std::string line;
    for (std::size_t r = 0; r < count; ++r) {
      if (!std::getline(in, line)) throw IoError("truncated file: " + path);
      std::istringstream ls(line);
      Eigen::VectorXd v(dim);
      Eigen::Index i = 0;
      double value;
      while (ls >> value) {
        if (i >= dim)
          throw FormatError(path + ": row " + std::to_string(r) +
                            " has too many values");
        v[i++] = value;
      }
      if (i != dim)
        throw FormatError(path + ": row " + std::to_string(r) + " has " +
                          std::to_string(i) + " values, expected " +
                          std::to_string(dim));
      out[r].values = std::move(v);
      out[r].kind = FeatureKind::External;
    }
  } else if (mode.empty()) {
    const std::size_t bytes = count * static_cast<std::size_t>(dim) * 8;
    std::string block(bytes, '\0');
    in.read(block.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
      throw IoError("truncated file: " + path);
    const char* p = block.data();
    for (std::size_t r = 0; r < count; ++r) {
      Eigen::VectorXd v(dim);
      for (Eigen::Index i = 0; i < dim; ++i, p += 8) {
        std::uint64_t u = 0;
        for (int byte = 0; byte < 8; ++byte)
          u |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[byte]))
               << (8 * byte);
        double d;
        std::memcpy(&d, &u, 8);
        v[i] = d;
      }
      out[r].values = std::move(v);
      out[r].kind = FeatureKind::External;
    }
  } else {
    throw FormatError(path + ": unknown FEAT mode '" + mode + "'");
  }
  return out;
}

std::vector<FeatureVector> load_external_features(const std::string& path) {
  return load_features(path);
}

}  // namespace csproxy
