#include "rinktrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/LU>

#include "rinktrack/errors.hpp"

namespace rinktrack {
namespace {

constexpr double kMinHomogeneousDivisor = 1e-9;

void check_invertible(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) {
    throw SingularHomography("homography has non-finite entries");
  }
  const double det = m.determinant();
  if (!(std::abs(det) > HomographyMatrix::kMinDeterminant)) {
    throw SingularHomography("homography is singular (|det| = " +
                             std::to_string(std::abs(det)) + ")");
  }
}

}  // namespace

HomographyMatrix::HomographyMatrix() : m_(Eigen::Matrix3d::Identity()) {}

HomographyMatrix HomographyMatrix::from_free_entries(
    const std::array<double, 8>& h) {
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0;
  check_invertible(m);
  return HomographyMatrix(m);
}

HomographyMatrix HomographyMatrix::from_matrix(const Eigen::Matrix3d& m) {
  const double s = m(2, 2);
  if (!std::isfinite(s) || std::abs(s) < kMinHomogeneousDivisor) {
    throw SingularHomography(
        "homography cannot be normalised: bottom-right entry is ~0");
  }
  Eigen::Matrix3d n = m / s;
  n(2, 2) = 1.0;
  check_invertible(n);
  return HomographyMatrix(n);
}

std::array<double, 8> HomographyMatrix::free_entries() const {
  return {m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0),
          m_(1, 1), m_(1, 2), m_(2, 0), m_(2, 1)};
}

bool is_valid(const BoundingBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.wd) &&
         std::isfinite(b.ht) && b.wd >= 0.0 && b.ht >= 0.0;
}

ImagePoint footpoint(const BoundingBox& b) {
  if (!is_valid(b)) {
    throw InvalidBox("bounding box must be finite with non-negative extent");
  }
  return {b.x + b.wd / 2.0, b.y + b.ht};
}

RinkPoint project(const HomographyMatrix& H, const ImagePoint& p) {
  const Eigen::Matrix3d& m = H.matrix();
  const double a = m(0, 0) * p.u + m(0, 1) * p.v + m(0, 2);
  const double b = m(1, 0) * p.u + m(1, 1) * p.v + m(1, 2);
  const double w = m(2, 0) * p.u + m(2, 1) * p.v + m(2, 2);
  if (!(std::abs(w) >= kMinHomogeneousDivisor)) {
    throw DegenerateProjection("point projects onto the horizon line");
  }
  return {a / w, b / w};
}

HomographyMatrix invert(const HomographyMatrix& H) {
  check_invertible(H.matrix());
  return HomographyMatrix::from_matrix(H.matrix().inverse());
}

HomographyMatrix compose(const HomographyMatrix& a, const HomographyMatrix& b) {
  return HomographyMatrix::from_matrix(a.matrix() * b.matrix());
}

RinkPoint normalize_rink(const RinkPoint& p, const RinkTemplate& t) {
  auto clamp = [](double v) {
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, kRinkClampLow, kRinkClampHigh);
  };
  return {clamp(p.rx / t.length), clamp(p.ry / t.width)};
}

}  // namespace rinktrack
