#include "digitgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "csproxy/rng.hpp"

namespace csproxy::digitgen {

namespace {

constexpr int kSide = 28;
constexpr double kPi = std::numbers::pi;

struct Point {
  double x, y;
};
using Stroke = std::vector<Point>;   // polyline in the unit box, y down
using Glyph = std::vector<Stroke>;

Stroke arc(double cx, double cy, double rx, double ry, double deg0,
           double deg1, int samples = 14) {
  Stroke s;
  s.reserve(samples + 1);
  for (int i = 0; i <= samples; ++i) {
    const double t = deg0 + (deg1 - deg0) * i / samples;
    const double rad = t * kPi / 180.0;
    s.push_back({cx + rx * std::cos(rad), cy + ry * std::sin(rad)});
  }
  return s;
}

Stroke line(Point a, Point b) { return {a, b}; }

// Skeletons live in [0,1]^2; style index picks a handwriting variant.
Glyph glyph(int digit, int style) {
  switch (digit) {
    case 0:
      return {arc(.5, .5, .30, .40, 0, 360, 22)};
    case 1:
      if (style == 0) return {line({.34, .26}, {.52, .08}), line({.52, .08}, {.52, .92})};
      return {line({.5, .08}, {.5, .92}), line({.32, .92}, {.68, .92})};
    case 2:
      return {arc(.5, .32, .28, .22, 180, 395),
              line({.66, .46}, {.22, .88}), line({.22, .88}, {.78, .88})};
    case 3:
      return {arc(.5, .30, .26, .20, 215, 400),
              arc(.5, .68, .28, .23, 330, 505)};
    case 4:
      if (style == 0)
        return {line({.52, .08}, {.18, .58}), line({.18, .58}, {.80, .58}),
                line({.62, .08}, {.62, .92})};
      return {line({.60, .08}, {.20, .58}), line({.20, .58}, {.80, .58}),
              line({.60, .30}, {.60, .92})};
    case 5:
      return {line({.74, .10}, {.28, .10}), line({.28, .10}, {.26, .44}),
              arc(.48, .66, .28, .25, 255, 470)};
    case 6:
      return {Stroke{{.66, .08}, {.50, .16}, {.37, .32}, {.29, .52}, {.27, .68}},
              arc(.5, .72, .22, .18, 180, 540, 20)};
    case 7:
      if (style == 0) return {line({.22, .12}, {.78, .12}), line({.78, .12}, {.40, .92})};
      return {line({.22, .12}, {.78, .12}), line({.78, .12}, {.40, .92}),
              line({.34, .52}, {.64, .52})};
    case 8:
      return {arc(.5, .30, .21, .19, 0, 360, 18),
              arc(.5, .68, .25, .22, 0, 360, 18)};
    case 9:
      return {arc(.5, .32, .23, .21, 0, 360, 18),
              Stroke{{.73, .32}, {.71, .55}, {.63, .76}, {.50, .92}}};
    default:
      return {};
  }
}

double dist_to_segment(double px, double py, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0)
    t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0);
  const double qx = a.x + t * dx, qy = a.y + t * dy;
  return std::hypot(px - qx, py - qy);
}

// Splits long segments so the elastic warp can bend them.
Stroke subdivide(const Stroke& stroke, double max_len) {
  Stroke out;
  for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
    const Point a = stroke[i], b = stroke[i + 1];
    const int pieces = std::max(
        1, static_cast<int>(std::ceil(std::hypot(b.x - a.x, b.y - a.y) /
                                      max_len)));
    for (int p = 0; p < pieces; ++p)
      out.push_back({a.x + (b.x - a.x) * p / pieces,
                     a.y + (b.y - a.y) * p / pieces});
  }
  out.push_back(stroke.back());
  return out;
}

// Smooth low-frequency displacement field: a handful of random sinusoids.
// Mimics the writer-to-writer shape variation of handwritten digits.
struct ElasticWarp {
  struct Wave {
    double ax, ay, fx, fy, phase;
  };
  std::vector<Wave> waves;

  static ElasticWarp random(rng::Generator& gen, double amplitude) {
    ElasticWarp warp;
    for (int j = 0; j < 3; ++j) {
      Wave w;
      w.ax = amplitude * (2.0 * gen.next_unit() - 1.0);
      w.ay = amplitude * (2.0 * gen.next_unit() - 1.0);
      w.fx = 0.5 + 1.3 * gen.next_unit();
      w.fy = 0.5 + 1.3 * gen.next_unit();
      w.phase = 2.0 * kPi * gen.next_unit();
      warp.waves.push_back(w);
    }
    return warp;
  }

  Point apply(Point p) const {
    double dx = 0.0, dy = 0.0;
    for (const Wave& w : waves) {
      const double s = std::sin(2.0 * kPi * (w.fx * p.x + w.fy * p.y) + w.phase);
      const double c = std::cos(2.0 * kPi * (w.fy * p.x - w.fx * p.y) + w.phase);
      dx += w.ax * s;
      dy += w.ay * c;
    }
    return {p.x + dx, p.y + dy};
  }
};

}  // namespace

ImageSet generate(std::size_t count, std::uint64_t seed) {
  rng::Generator gen(seed);
  ImageSet set;
  set.height = kSide;
  set.width = kSide;
  set.source = "synthetic-digits(count=" + std::to_string(count) +
               ",seed=" + std::to_string(seed) + ")";
  set.images.reserve(count);
  set.labels.reserve(count);

  std::uint64_t checksum = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < count; ++i) {
    const int digit = static_cast<int>(gen.next_below(10));
    const int style = static_cast<int>(gen.next_below(2));
    Glyph g = glyph(digit, style);

    // Writer variation: smooth elastic deformation of the skeleton plus an
    // affine jitter about the glyph center; the body scales to ~20px inside
    // the 28px frame.
    const ElasticWarp warp = ElasticWarp::random(gen, 0.020);
    const double angle = 0.18 * (2.0 * gen.next_unit() - 1.0);
    const double scale_x = 0.92 + 0.30 * (gen.next_unit() - 0.5);
    const double scale_y = 0.92 + 0.30 * (gen.next_unit() - 0.5);
    const double shear = 0.32 * (gen.next_unit() - 0.5);
    const double shift_x = 3.5 * (gen.next_unit() - 0.5);
    const double shift_y = 3.5 * (gen.next_unit() - 0.5);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double body = 21.0;
    const double offset = (kSide - 1) / 2.0;

    for (Stroke& stroke : g) {
      stroke = subdivide(stroke, 0.07);
      for (Point& p : stroke) {
        const Point warped = warp.apply(p);
        double x = (warped.x - 0.5) + 0.015 * gen.next_gaussian();
        double y = (warped.y - 0.5) + 0.015 * gen.next_gaussian();
        x += shear * y;
        const double rx = ca * x - sa * y;
        const double ry = sa * x + ca * y;
        p.x = rx * scale_x * body + offset + shift_x;
        p.y = ry * scale_y * body + offset + shift_y;
      }
    }

    const double width = 2.75 + 1.0 * gen.next_unit();   // stroke width, px
    const double soft = 0.85;                           // edge falloff, px
    const double peak = 0.82 + 0.18 * gen.next_unit();

    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(kSide, kSide);
    for (const Stroke& stroke : g) {
      const double stroke_width =
          width * (0.85 + 0.3 * gen.next_unit());  // pen pressure
      const double reach = stroke_width / 2.0 + soft;
      for (std::size_t s = 0; s + 1 < stroke.size(); ++s) {
        const Point a = stroke[s], b = stroke[s + 1];
        const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - reach)));
        const int r1 = std::min(kSide - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + reach)));
        const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - reach)));
        const int c1 = std::min(kSide - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + reach)));
        for (int r = r0; r <= r1; ++r)
          for (int c = c0; c <= c1; ++c) {
            const double d = dist_to_segment(c, r, a, b);
            const double v = peak * std::clamp(
                (stroke_width / 2.0 + soft - d) / soft, 0.0, 1.0);
            if (v > img(r, c)) img(r, c) = v;
          }
      }
    }

    // Byte quantization keeps IDX round-trips exact.
    for (int r = 0; r < kSide; ++r)
      for (int c = 0; c < kSide; ++c) {
        const auto byte =
            static_cast<std::uint8_t>(std::lround(img(r, c) * 255.0));
        img(r, c) = byte / 255.0;
        checksum ^= byte;
        checksum *= 0x100000001b3ull;
      }

    set.images.push_back(std::move(img));
    set.labels.push_back(digit);
    checksum ^= static_cast<std::uint8_t>(digit);
    checksum *= 0x100000001b3ull;
  }
  set.checksum = checksum;
  return set;
}

}  // namespace csproxy::digitgen
