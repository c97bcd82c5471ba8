#ifndef MEMBRELAX_BASE_HPP
#define MEMBRELAX_BASE_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace membrelax {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat22 = Eigen::Matrix2d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat33 = Eigen::Matrix3d;

// A 3x3 deformation gradient is handled as the pair (planar | third column).
inline Mat33 join(const Mat32& planar, const Vec3& third) {
  Mat33 m;
  m.col(0) = planar.col(0);
  m.col(1) = planar.col(1);
  m.col(2) = third;
  return m;
}

inline Mat32 planar_part(const Mat33& m) {
  Mat32 p;
  p.col(0) = m.col(0);
  p.col(1) = m.col(1);
  return p;
}

inline Vec3 third_column(const Mat33& m) { return m.col(2); }

inline Mat32 outer32(const Vec3& z, const Vec2& nu) { return z * nu.transpose(); }

// Error taxonomy shared by all modules. Codes mirror the CLI exit map.
struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct convergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct scene_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct resolution_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ambiguity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace membrelax

#endif
