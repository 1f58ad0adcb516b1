#include "mipcls/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mipcls/error.hpp"

namespace mipcls {

namespace {

Affine translated(const Affine& a, double dx, double dy, double dz) {
  Affine t = Affine::Identity();
  t(0, 3) = dx;
  t(1, 3) = dy;
  t(2, 3) = dz;
  return a * t;
}

// Linear interpolation taps for one output coordinate along an axis.
struct Tap {
  std::size_t lo;
  std::size_t hi;
  double w;  // weight of hi
};

std::vector<Tap> make_taps(std::size_t n_in, std::size_t n_out, double step, Interp interp) {
  std::vector<Tap> taps(n_out);
  const double last = static_cast<double>(n_in - 1);
  for (std::size_t o = 0; o < n_out; ++o) {
    const double c = std::clamp(static_cast<double>(o) * step, 0.0, last);
    if (interp == Interp::Nearest) {
      const auto i = static_cast<std::size_t>(std::min(std::floor(c + 0.5), last));
      taps[o] = {i, i, 0.0};
    } else {
      const auto lo = static_cast<std::size_t>(std::floor(c));
      const std::size_t hi = std::min(lo + 1, n_in - 1);
      taps[o] = {lo, hi, c - static_cast<double>(lo)};
    }
  }
  return taps;
}

// One separable pass along `axis`. Trilinear interpolation factorizes into
// three 1D linear passes because the sampling grid is axis-aligned.
std::vector<float> resample_axis(const std::vector<float>& in, const Dims3& dims, int axis,
                                 const std::vector<Tap>& taps, Dims3& out_dims) {
  out_dims = dims;
  out_dims[axis] = taps.size();
  std::vector<float> out(out_dims[0] * out_dims[1] * out_dims[2]);
  const std::size_t nx = dims[0], ny = dims[1];
  const std::size_t ox = out_dims[0], oy = out_dims[1];
  for (std::size_t z = 0; z < out_dims[2]; ++z) {
    for (std::size_t y = 0; y < out_dims[1]; ++y) {
      for (std::size_t x = 0; x < out_dims[0]; ++x) {
        std::size_t a, b;
        double w;
        if (axis == 0) {
          const Tap& t = taps[x];
          a = t.lo + nx * (y + ny * z);
          b = t.hi + nx * (y + ny * z);
          w = t.w;
        } else if (axis == 1) {
          const Tap& t = taps[y];
          a = x + nx * (t.lo + ny * z);
          b = x + nx * (t.hi + ny * z);
          w = t.w;
        } else {
          const Tap& t = taps[z];
          a = x + nx * (y + ny * t.lo);
          b = x + nx * (y + ny * t.hi);
          w = t.w;
        }
        const double va = in[a];
        out[x + ox * (y + oy * z)] = (w == 0.0) ? in[a] : static_cast<float>(va + w * (in[b] - va));
      }
    }
  }
  return out;
}

Volume sub_volume(const Volume& v, const Dims3& lo, const Dims3& ext) {
  std::vector<float> data(ext[0] * ext[1] * ext[2]);
  for (std::size_t z = 0; z < ext[2]; ++z) {
    for (std::size_t y = 0; y < ext[1]; ++y) {
      const float* src = v.data().data() + v.index(lo[0], lo[1] + y, lo[2] + z);
      std::copy(src, src + ext[0], data.begin() + static_cast<std::ptrdiff_t>(ext[0] * (y + ext[1] * z)));
    }
  }
  const Affine a = translated(v.affine(), static_cast<double>(lo[0]), static_cast<double>(lo[1]),
                              static_cast<double>(lo[2]));
  return Volume(ext, v.spacing(), a, std::move(data));
}

}  // namespace

Volume reorient_canonical(const Volume& v) {
  const AxisCodes codes = axis_codes(v.affine());
  const bool identity = codes.world_axis == std::array<int, 3>{0, 1, 2} &&
                        !codes.flip[0] && !codes.flip[1] && !codes.flip[2];
  if (identity) return v;

  // Output axis j reads input axis src[j].
  std::array<int, 3> src{};
  for (int i = 0; i < 3; ++i) src[codes.world_axis[i]] = i;

  Dims3 out_dims{};
  Spacing3 out_spacing{};
  for (int j = 0; j < 3; ++j) {
    out_dims[j] = v.dims()[src[j]];
    out_spacing[j] = v.spacing()[src[j]];
  }

  // in_index = T * out_index (homogeneous).
  Affine t = Affine::Zero();
  t(3, 3) = 1.0;
  for (int j = 0; j < 3; ++j) {
    const int i = src[j];
    if (codes.flip[i]) {
      t(i, j) = -1.0;
      t(i, 3) = static_cast<double>(v.dims()[i]) - 1.0;
    } else {
      t(i, j) = 1.0;
    }
  }

  std::vector<float> data(v.size());
  std::array<std::size_t, 3> in{};
  for (std::size_t z = 0; z < out_dims[2]; ++z) {
    for (std::size_t y = 0; y < out_dims[1]; ++y) {
      for (std::size_t x = 0; x < out_dims[0]; ++x) {
        const std::array<std::size_t, 3> o{x, y, z};
        for (int j = 0; j < 3; ++j) {
          const int i = src[j];
          in[i] = codes.flip[i] ? v.dims()[i] - 1 - o[j] : o[j];
        }
        data[x + out_dims[0] * (y + out_dims[1] * z)] = v.at(in[0], in[1], in[2]);
      }
    }
  }
  return Volume(out_dims, out_spacing, v.affine() * t, std::move(data));
}

Volume resample(const Volume& v, const Spacing3& target, Interp interp) {
  for (double t : target) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error(ErrorCode::InvalidArgument, "target spacing must be finite and > 0");
    }
  }
  if (target == v.spacing()) return v;

  Dims3 dims = v.dims();
  std::vector<float> data(v.data().begin(), v.data().end());
  Affine a = v.affine();
  for (int axis = 0; axis < 3; ++axis) {
    const double ratio = v.spacing()[axis] / target[axis];
    const auto n_out = static_cast<std::size_t>(
        std::max(1.0, std::round(static_cast<double>(dims[axis]) * ratio)));
    const double step = target[axis] / v.spacing()[axis];
    if (n_out == dims[axis] && step == 1.0) continue;
    const auto taps = make_taps(dims[axis], n_out, step, interp);
    Dims3 out_dims{};
    data = resample_axis(data, dims, axis, taps, out_dims);
    dims = out_dims;
    a.block<3, 1>(0, axis) *= step;
  }
  return Volume(dims, target, a, std::move(data));
}

Volume crop_or_pad(const Volume& v, const Dims3& target, float fill) {
  for (std::size_t d : target) {
    if (d < 1) throw Error(ErrorCode::InvalidArgument, "crop_or_pad target dims must be >= 1");
  }
  if (target == v.dims()) return v;

  // out index o maps to input index o + shift[axis].
  std::array<std::ptrdiff_t, 3> shift{};
  for (int i = 0; i < 3; ++i) {
    const auto n = static_cast<std::ptrdiff_t>(v.dims()[i]);
    const auto t = static_cast<std::ptrdiff_t>(target[i]);
    shift[i] = n >= t ? (n - t) / 2 : -((t - n) / 2);
  }

  std::vector<float> data(target[0] * target[1] * target[2], fill);
  for (std::size_t z = 0; z < target[2]; ++z) {
    const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z) + shift[2];
    if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(v.nz())) continue;
    for (std::size_t y = 0; y < target[1]; ++y) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) + shift[1];
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(v.ny())) continue;
      for (std::size_t x = 0; x < target[0]; ++x) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x) + shift[0];
        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(v.nx())) continue;
        data[x + target[0] * (y + target[1] * z)] =
            v.at(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy), static_cast<std::size_t>(iz));
      }
    }
  }
  const Affine a = translated(v.affine(), static_cast<double>(shift[0]), static_cast<double>(shift[1]),
                              static_cast<double>(shift[2]));
  return Volume(target, v.spacing(), a, std::move(data));
}

RowWindow localize_rows(const Volume& v, std::size_t window) {
  if (window < 1) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  const std::size_t rows = v.ny();
  if (rows <= window) return RowWindow{0, rows, kHeightAxis};

  std::vector<double> row_sum(rows, 0.0);
  for (std::size_t z = 0; z < v.nz(); ++z) {
    for (std::size_t y = 0; y < rows; ++y) {
      const float* p = v.data().data() + v.index(0, y, z);
      double s = 0.0;
      for (std::size_t x = 0; x < v.nx(); ++x) s += p[x];
      row_sum[y] += s;
    }
  }
  std::vector<double> prefix(rows + 1, 0.0);
  for (std::size_t y = 0; y < rows; ++y) prefix[y + 1] = prefix[y] + row_sum[y];

  std::size_t best = 0;
  double best_sum = prefix[window] - prefix[0];
  for (std::size_t s = 1; s + window <= rows; ++s) {
    const double sum = prefix[s + window] - prefix[s];
    if (sum > best_sum) {
      best_sum = sum;
      best = s;
    }
  }
  return RowWindow{best, window, kHeightAxis};
}

Volume crop_window(const Volume& v, const RowWindow& w) {
  if (w.axis < 0 || w.axis > 2) throw Error(ErrorCode::InvalidArgument, "window axis out of range");
  if (w.length < 1 || w.end() > v.dims()[w.axis]) {
    throw Error(ErrorCode::InvalidArgument, "window exceeds axis extent");
  }
  Dims3 lo{0, 0, 0};
  Dims3 ext = v.dims();
  lo[w.axis] = w.start;
  ext[w.axis] = w.length;
  return sub_volume(v, lo, ext);
}

std::pair<Volume, Volume> split_lr(const Volume& v) {
  if (v.nx() < 2) throw Error(ErrorCode::WidthTooSmall, "width axis must have extent >= 2");
  const std::size_t half = v.nx() / 2;
  return {sub_volume(v, {0, 0, 0}, {half, v.ny(), v.nz()}),
          sub_volume(v, {half, 0, 0}, {v.nx() - half, v.ny(), v.nz()})};
}

Volume concat_x(const Volume& low, const Volume& high) {
  if (low.ny() != high.ny() || low.nz() != high.nz()) {
    throw Error(ErrorCode::GridMismatch, "concat_x requires equal ny and nz");
  }
  const std::size_t nx = low.nx() + high.nx();
  std::vector<float> data(nx * low.ny() * low.nz());
  for (std::size_t z = 0; z < low.nz(); ++z) {
    for (std::size_t y = 0; y < low.ny(); ++y) {
      float* dst = data.data() + nx * (y + low.ny() * z);
      const float* a = low.data().data() + low.index(0, y, z);
      const float* b = high.data().data() + high.index(0, y, z);
      std::copy(a, a + low.nx(), dst);
      std::copy(b, b + high.nx(), dst + low.nx());
    }
  }
  return Volume({nx, low.ny(), low.nz()}, low.spacing(), low.affine(), std::move(data));
}

}  // namespace mipcls
