#include "csproxy/sensing.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "csproxy/errors.hpp"
#include "csproxy/rng.hpp"

namespace csproxy {

namespace {

void flatten_row_major(const Eigen::MatrixXd& image, Eigen::VectorXd& out) {
  out.resize(image.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c) out[k++] = image(r, c);
}

Eigen::MatrixXd unflatten_row_major(const Eigen::VectorXd& v,
                                    Eigen::Index height, Eigen::Index width) {
  Eigen::MatrixXd out(height, width);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < height; ++r)
    for (Eigen::Index c = 0; c < width; ++c) out(r, c) = v[k++];
  return out;
}

void append_le_f64(std::string& buf, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

double read_le_f64(const char* p) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i)
    u |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i]))
         << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

std::string Provenance::describe() const {
  if (kind == Kind::Random) {
    std::ostringstream os;
    os << "random(seed=" << seed << ", variance=" << variance << ")";
    return os.str();
  }
  return "loaded(" + path + ")";
}

MeasurementMatrix::MeasurementMatrix(Eigen::MatrixXd entries,
                                     Provenance provenance)
    : entries_(std::move(entries)), provenance_(std::move(provenance)) {
  if (entries_.rows() < 1 || entries_.cols() < 1 ||
      entries_.rows() > entries_.cols())
    throw ArgumentError("measurement matrix must satisfy 1 <= m <= n, got " +
                        std::to_string(entries_.rows()) + "x" +
                        std::to_string(entries_.cols()));
}

MeasurementMatrix MeasurementMatrix::generate(Eigen::Index m, Eigen::Index n,
                                              std::uint64_t seed) {
  if (m < 1 || n < 1 || m > n)
    throw ArgumentError("generate_matrix: need 1 <= m <= n, got m=" +
                        std::to_string(m) + " n=" + std::to_string(n));
  Eigen::MatrixXd entries(m, n);
  rng::Generator gen(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  // Row-major fill order so the draw sequence is part of the documented format.
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      entries(r, c) = gen.next_gaussian() * scale;
  Provenance prov;
  prov.kind = Provenance::Kind::Random;
  prov.seed = seed;
  prov.variance = 1.0 / static_cast<double>(m);
  return MeasurementMatrix(std::move(entries), std::move(prov));
}

MeasurementMatrix MeasurementMatrix::from_entries(Eigen::MatrixXd entries,
                                                  Provenance provenance) {
  return MeasurementMatrix(std::move(entries), std::move(provenance));
}

void MeasurementMatrix::save(const std::string& path,
                             SaveFormat format) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const Eigen::Index m = entries_.rows(), n = entries_.cols();
  if (format == SaveFormat::Text) {
    out << "PSIMAT v1 " << m << " " << n << "\n";
    char buf[40];
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", entries_(r, c));
        if (c) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  } else {
    out << "PSIMAT v1 " << m << " " << n << " bin\n";
    std::string block;
    block.reserve(static_cast<std::size_t>(m) * n * 8);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < n; ++c) append_le_f64(block, entries_(r, c));
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

MeasurementMatrix MeasurementMatrix::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("truncated file: " + path);
  std::istringstream hs(header);
  std::string tag, version, mode;
  long m = 0, n = 0;
  hs >> tag >> version >> m >> n;
  if (tag != "PSIMAT" || version != "v1" || hs.fail() || m < 1 || n < 1)
    throw FormatError(path + ": bad PSIMAT header '" + header + "'");
  if (m > n)
    throw FormatError(path + ": m > n violates the compressive regime");
  hs >> mode;

  Eigen::MatrixXd entries(m, n);
  if (mode == "bin") {
    const std::size_t bytes = static_cast<std::size_t>(m) * n * 8;
    std::string block(bytes, '\0');
    in.read(block.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
      throw IoError("truncated file: " + path);
    const char* p = block.data();
    for (long r = 0; r < m; ++r)
      for (long c = 0; c < n; ++c, p += 8) entries(r, c) = read_le_f64(p);
  } else if (mode.empty()) {
    for (long r = 0; r < m; ++r)
      for (long c = 0; c < n; ++c) {
        double v;
        if (!(in >> v)) {
          if (in.eof()) throw IoError("truncated file: " + path);
          throw FormatError(path + ": bad float in row " + std::to_string(r));
        }
        entries(r, c) = v;
      }
  } else {
    throw FormatError(path + ": unknown PSIMAT mode '" + mode + "'");
  }

  Provenance prov;
  prov.kind = Provenance::Kind::Loaded;
  prov.path = path;
  return MeasurementMatrix::from_entries(std::move(entries), std::move(prov));
}

std::size_t measurement_count(double rate, std::size_t n) {
  if (!(rate > 0.0) || rate > 1.0)
    throw ArgumentError("measurement rate must be in (0,1], got " +
                        std::to_string(rate));
  const auto m = static_cast<std::size_t>(
      std::llround(rate * static_cast<double>(n)));
  return m < 1 ? 1 : m;
}

Measurement sense(const Eigen::MatrixXd& image, const MeasurementMatrix& psi) {
  if (image.size() != psi.signal_dim())
    throw ArgumentError("sense: image has " + std::to_string(image.size()) +
                        " pixels but matrix expects " +
                        std::to_string(psi.signal_dim()));
  Eigen::VectorXd flat;
  flatten_row_major(image, flat);
  Measurement m;
  m.values = psi.entries() * flat;
  m.rate = psi.rate();
  return m;
}

Eigen::MatrixXd back_project(const Eigen::VectorXd& y,
                             const MeasurementMatrix& psi, Eigen::Index height,
                             Eigen::Index width) {
  if (y.size() != psi.measurements())
    throw ArgumentError("back_project: measurement length " +
                        std::to_string(y.size()) + " does not match m=" +
                        std::to_string(psi.measurements()));
  if (height * width != psi.signal_dim())
    throw ArgumentError("back_project: height*width != n");
  const Eigen::VectorXd flat = psi.entries().transpose() * y;
  return unflatten_row_major(flat, height, width);
}

Eigen::MatrixXd back_project(const Measurement& y, const MeasurementMatrix& psi,
                             Eigen::Index height, Eigen::Index width) {
  return back_project(y.values, psi, height, width);
}

std::vector<Eigen::MatrixXd> proxy_batch(
    const std::vector<Eigen::MatrixXd>& images, const MeasurementMatrix& psi) {
  std::vector<Eigen::MatrixXd> out(images.size());
  if (images.empty()) return out;
  const Eigen::Index height = images.front().rows();
  const Eigen::Index width = images.front().cols();
  constexpr Eigen::Index kBlock = 512;
  Eigen::VectorXd flat;
  for (std::size_t base = 0; base < images.size();
       base += static_cast<std::size_t>(kBlock)) {
    const Eigen::Index count = static_cast<Eigen::Index>(
        std::min<std::size_t>(kBlock, images.size() - base));
    Eigen::MatrixXd stacked(psi.signal_dim(), count);
    for (Eigen::Index j = 0; j < count; ++j) {
      const Eigen::MatrixXd& img = images[base + j];
      if (img.size() != psi.signal_dim())
        throw ArgumentError("proxy_batch: image size mismatch");
      flatten_row_major(img, flat);
      stacked.col(j) = flat;
    }
    const Eigen::MatrixXd proxies =
        psi.entries().transpose() * (psi.entries() * stacked);
    for (Eigen::Index j = 0; j < count; ++j)
      out[base + j] = unflatten_row_major(proxies.col(j), height, width);
  }
  return out;
}

}  // namespace csproxy
