#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library code paths it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace oracle {

// NIfTI-1 header as laid out by the standard's nifti1.h.
#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348);

inline Nifti1Header blank_header(std::array<std::int16_t, 3> dims, std::int16_t datatype, std::int16_t bitpix) {
  Nifti1Header h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.dim[0] = 3;
  for (int i = 0; i < 3; ++i) h.dim[i + 1] = dims[i];
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.datatype = datatype;
  h.bitpix = bitpix;
  h.pixdim[0] = 1.0f;
  for (int i = 1; i < 4; ++i) h.pixdim[i] = 1.0f;
  h.vox_offset = 352.0f;
  h.sform_code = 1;
  h.srow_x[0] = 1.0f;
  h.srow_y[1] = 1.0f;
  h.srow_z[2] = 1.0f;
  std::memcpy(h.magic, "n+1\0", 4);
  return h;
}

template <typename T>
std::vector<std::uint8_t> nifti_file(const Nifti1Header& h, const std::vector<T>& voxels) {
  std::vector<std::uint8_t> out(352 + voxels.size() * sizeof(T), 0);
  std::memcpy(out.data(), &h, sizeof(h));
  std::memcpy(out.data() + 352, voxels.data(), voxels.size() * sizeof(T));
  return out;
}

// O(n^2) Mann-Whitney pair count.
inline double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  return num / pairs;
}

// Exhaustive thresholds: every distinct score plus +inf.
inline std::vector<double> thresholds(const std::vector<double>& scores) {
  std::vector<double> t = scores;
  t.push_back(std::numeric_limits<double>::infinity());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

inline std::pair<double, double> sens_spec_at(const std::vector<double>& scores, const std::vector<int>& labels,
                                              double t) {
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pos = scores[i] >= t;
    if (labels[i]) (pos ? tp : fn) += 1;
    else (pos ? fp : tn) += 1;
  }
  return {tp / (tp + fn), tn / (tn + fp)};
}

inline double sens_at_spec(const std::vector<double>& s, const std::vector<int>& y, double floor) {
  double best = 0.0;
  for (double t : thresholds(s)) {
    auto [sens, spec] = sens_spec_at(s, y, t);
    if (spec >= floor - 1e-12) best = std::max(best, sens);
  }
  return best;
}

inline double spec_at_sens(const std::vector<double>& s, const std::vector<int>& y, double floor) {
  double best = 0.0;
  for (double t : thresholds(s)) {
    auto [sens, spec] = sens_spec_at(s, y, t);
    if (sens >= floor - 1e-12) best = std::max(best, spec);
  }
  return best;
}

// Long-double softmax computed without max subtraction.
inline std::array<long double, 3> softmax_ld(const std::array<long double, 3>& z) {
  long double sum = 0.0L;
  std::array<long double, 3> e{};
  for (int c = 0; c < 3; ++c) {
    e[c] = std::exp(z[c]);
    sum += e[c];
  }
  for (auto& v : e) v /= sum;
  return e;
}

// Weighted CE of a linear head in long double: features row-major n x d,
// weight row-major d x 3.
inline long double head_loss_ld(const std::vector<std::vector<float>>& f, const std::vector<int>& y,
                                const std::vector<long double>& weight, const std::array<long double, 3>& bias,
                                const std::array<double, 3>& cw) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::array<long double, 3> z = bias;
    for (std::size_t d = 0; d < f[i].size(); ++d) {
      for (int c = 0; c < 3; ++c) z[c] += static_cast<long double>(f[i][d]) * weight[d * 3 + c];
    }
    const auto p = softmax_ld(z);
    acc += cw[y[i]] * std::log(std::max(p[y[i]], 1e-12L));
  }
  return -acc / static_cast<long double>(f.size());
}

// Brute-force best window: sums each candidate directly.
inline std::size_t best_window_start(const std::vector<float>& data, std::size_t nx, std::size_t ny,
                                     std::size_t nz, std::size_t window) {
  if (ny <= window) return 0;
  std::size_t best = 0;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s + window <= ny; ++s) {
    double sum = 0.0;
    for (std::size_t z = 0; z < nz; ++z)
      for (std::size_t y = s; y < s + window; ++y)
        for (std::size_t x = 0; x < nx; ++x) sum += data[x + nx * (y + ny * z)];
    if (sum > best_sum) {
      best_sum = sum;
      best = s;
    }
  }
  return best;
}

inline double lerp1d(const std::vector<double>& v, double coord) {
  coord = std::clamp(coord, 0.0, static_cast<double>(v.size() - 1));
  const auto i = static_cast<std::size_t>(coord);
  if (i + 1 >= v.size()) return v.back();
  const double t = coord - static_cast<double>(i);
  return v[i] * (1.0 - t) + v[i + 1] * t;
}

}  // namespace oracle
