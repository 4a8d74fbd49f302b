#pragma once

#include <array>

#include <Eigen/Core>

namespace rinktrack {

/// Axis-aligned image box: left/top corner plus extent, in pixels.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double wd = 0.0;
  double ht = 0.0;

  bool operator==(const BoundingBox&) const = default;
};

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
};

/// Position on the overhead rink template.
struct RinkPoint {
  double rx = 0.0;
  double ry = 0.0;
};

struct RinkTemplate {
  double length = 200.0;
  double width = 85.0;
};

/// Planar projective map stored row-major with the bottom-right entry fixed
/// to 1. Construction rejects matrices that are not invertible.
class HomographyMatrix {
 public:
  static constexpr double kMinDeterminant = 1e-12;

  HomographyMatrix();  // identity

  /// Takes the eight free entries h11..h32; h33 is implicitly 1.
  static HomographyMatrix from_free_entries(const std::array<double, 8>& h);

  /// Rescales an arbitrary 3x3 matrix so that its (3,3) entry becomes 1.
  static HomographyMatrix from_matrix(const Eigen::Matrix3d& m);

  const Eigen::Matrix3d& matrix() const { return m_; }
  std::array<double, 8> free_entries() const;
  double operator()(int r, int c) const { return m_(r, c); }

  bool operator==(const HomographyMatrix& o) const { return m_ == o.m_; }

 private:
  explicit HomographyMatrix(const Eigen::Matrix3d& m) : m_(m) {}
  Eigen::Matrix3d m_;
};

/// Bottom-mid point of the box (the player's contact point with the ice).
ImagePoint footpoint(const BoundingBox& b);

/// Applies H to (u, v, 1) and divides by the homogeneous coordinate.
RinkPoint project(const HomographyMatrix& H, const ImagePoint& p);

/// Inverse map, renormalised to a unit bottom-right entry.
HomographyMatrix invert(const HomographyMatrix& H);

/// Composition a∘b, i.e. the matrix product a·b renormalised.
HomographyMatrix compose(const HomographyMatrix& a, const HomographyMatrix& b);

/// Scales rink coordinates into template fractions, clamped to
/// [kRinkClampLow, kRinkClampHigh] on both axes.
inline constexpr double kRinkClampLow = -0.25;
inline constexpr double kRinkClampHigh = 1.25;
RinkPoint normalize_rink(const RinkPoint& p, const RinkTemplate& t);

bool is_valid(const BoundingBox& b);

}  // namespace rinktrack
