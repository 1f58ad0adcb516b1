#include "mipcls/volume.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "mipcls/error.hpp"

namespace mipcls {

Volume::Volume(Dims3 dims, Spacing3 spacing, const Affine& affine, std::vector<float> data)
    : dims_(dims), spacing_(spacing), affine_(affine), data_(std::move(data)) {
  for (std::size_t d : dims_) {
    if (d < 1) throw Error(ErrorCode::InvalidArgument, "volume dims must be >= 1");
  }
  for (double s : spacing_) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorCode::InvalidArgument, "volume spacing must be finite and > 0");
    }
  }
  if (data_.size() != dims_[0] * dims_[1] * dims_[2]) {
    throw Error(ErrorCode::LengthMismatch, "volume data length does not match dims");
  }
  const double det = affine_.topLeftCorner<3, 3>().determinant();
  if (!std::isfinite(det) || std::abs(det) <= 1e-12 || !affine_.allFinite()) {
    throw Error(ErrorCode::NonInvertibleAffine, "volume affine is singular or non-finite");
  }
}

Volume Volume::filled(Dims3 dims, Spacing3 spacing, float value) {
  Affine a = Affine::Identity();
  for (int i = 0; i < 3; ++i) a(i, i) = spacing[i];
  return Volume(dims, spacing, a, std::vector<float>(dims[0] * dims[1] * dims[2], value));
}

std::string Volume::orientation() const { return orientation_string(axis_codes(affine_)); }

bool Volume::same_grid(const Volume& other, double tol) const {
  if (dims_ != other.dims_) return false;
  return (affine_ - other.affine_).cwiseAbs().maxCoeff() <= tol;
}

Volume Volume::with_data(std::vector<float> data) const {
  return Volume(dims_, spacing_, affine_, std::move(data));
}

AxisCodes axis_codes(const Affine& affine) {
  const Eigen::Matrix3d m = affine.topLeftCorner<3, 3>();
  // Normalize columns so large spacings do not dominate the assignment.
  Eigen::Matrix3d dirs = m;
  for (int c = 0; c < 3; ++c) {
    const double n = m.col(c).norm();
    if (n > 0) dirs.col(c) /= n;
  }
  std::array<int, 3> perm{0, 1, 2};
  std::array<int, 3> best = perm;
  double best_score = -1.0;
  do {
    double score = 0.0;
    for (int i = 0; i < 3; ++i) score += std::abs(dirs(perm[i], i));
    if (score > best_score + 1e-12) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  AxisCodes codes;
  for (int i = 0; i < 3; ++i) {
    codes.world_axis[i] = best[i];
    codes.flip[i] = dirs(best[i], i) < 0.0;
  }
  return codes;
}

std::string orientation_string(const AxisCodes& codes) {
  static constexpr char kPos[3] = {'R', 'A', 'S'};
  static constexpr char kNeg[3] = {'L', 'P', 'I'};
  std::string out(3, '?');
  for (int i = 0; i < 3; ++i) {
    const int w = codes.world_axis[i];
    out[i] = codes.flip[i] ? kNeg[w] : kPos[w];
  }
  return out;
}

}  // namespace mipcls
