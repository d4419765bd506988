#pragma once

// Pinhole camera: world-to-camera rigid transform x_cam = R x_world + t,
// camera looks down +z, projection u = fx x/z + cx. Pixel (ix, iy) samples
// the scene at continuous position (ix + 0.5, iy + 0.5).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace stylesplat {

using Mat3 = Eigen::Matrix3f;
using Vec3 = Eigen::Vector3f;
using Vec2 = Eigen::Vector2f;

struct Camera {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  float fx = 64.0f, fy = 64.0f;
  float cx = 32.0f, cy = 32.0f;
  int width = 64, height = 64;

  void validate() const {
    if (fx <= 0.0f || fy <= 0.0f) throw std::invalid_argument("camera: non-positive focal length");
    Mat3 should_be_identity = R * R.transpose();
    if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4f)
      throw std::invalid_argument("camera: R is not a rotation matrix");
    if (std::abs(R.determinant() - 1.0f) > 1e-4f)
      throw std::invalid_argument("camera: R has negative determinant");
  }

  Vec3 world_to_cam(const Vec3& p) const { return R * p + t; }
  Vec3 cam_to_world(const Vec3& p) const { return R.transpose() * (p - t); }
  Vec3 position() const { return -(R.transpose() * t); }

  // Unit world-space ray through the center of pixel (ix, iy).
  Vec3 pixel_ray(int ix, int iy) const {
    Vec3 d((ix + 0.5f - cx) / fx, (iy + 0.5f - cy) / fy, 1.0f);
    d.normalize();
    return R.transpose() * d;
  }

  // Projects a camera-space point; valid only for z > 0.
  Vec2 project_cam(const Vec3& pc) const {
    return Vec2(fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy);
  }

  // This camera's pose expressed in `base`'s camera frame: maps points given
  // in base cam coordinates to this camera's coordinates.
  Camera relative_to(const Camera& base) const {
    Camera out = *this;
    out.R = R * base.R.transpose();
    out.t = t - out.R * base.t;
    return out;
  }
};

// Camera at `eye` looking at `target`. `up` is the world up direction; the
// camera y axis (image downward) ends up opposite to it.
inline Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 1, 0)) {
  Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-6f) x = z.cross(Vec3(1, 0, 0));
  x.normalize();
  Vec3 y = z.cross(x);
  Camera cam;
  cam.R.row(0) = x;
  cam.R.row(1) = y;
  cam.R.row(2) = z;
  cam.t = -(cam.R * eye);
  return cam;
}

// Angle of the relative rotation between two cameras, in degrees.
inline float rotation_angle_deg(const Camera& a, const Camera& b) {
  Mat3 rel = a.R * b.R.transpose();
  float c = (rel.trace() - 1.0f) * 0.5f;
  c = std::max(-1.0f, std::min(1.0f, c));
  return std::acos(c) * 180.0f / 3.14159265358979f;
}

}  // namespace stylesplat
