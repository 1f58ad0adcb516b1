#include "mipcls/phantom.hpp"

#include <cmath>
#include <cstdio>

#include "io_util.hpp"
#include "mipcls/error.hpp"
#include "mipcls/rng.hpp"
#include "mipcls/tensorio.hpp"

namespace mipcls {

namespace {

constexpr double kBreastBase = 100.0;
constexpr double kChestBase = 150.0;
constexpr double kBreastUptake = 12.0;
constexpr double kChestUptake = 25.0;

struct Layout {
  double chest_y0, chest_y1;   // chest slab rows (RAS y)
  double breast_ry;            // breast extends from chest_y1 to chest_y1 + breast_ry
  double breast_rx, breast_rz;
  std::array<double, 2> breast_cx;  // {low x, high x}
  double cz;
};

Layout layout_for(const Dims3& d) {
  const double nx = static_cast<double>(d[0]), ny = static_cast<double>(d[1]), nz = static_cast<double>(d[2]);
  return Layout{0.32 * ny, 0.45 * ny, 0.35 * ny, 0.21 * nx, 0.45 * nz, {0.25 * nx, 0.75 * nx}, 0.5 * (nz - 1)};
}

bool in_breast(const Layout& L, int half, double x, double y, double z) {
  if (y < L.chest_y1) return false;
  const double dx = (x - L.breast_cx[static_cast<std::size_t>(half)]) / L.breast_rx;
  const double dy = (y - L.chest_y1) / L.breast_ry;
  const double dz = (z - L.cz) / L.breast_rz;
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

Volume to_lps(const std::vector<float>& ras, const Dims3& d, const Spacing3& s) {
  std::vector<float> out(ras.size());
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      for (std::size_t x = 0; x < d[0]; ++x) {
        out[x + d[0] * (y + d[1] * z)] = ras[(d[0] - 1 - x) + d[0] * ((d[1] - 1 - y) + d[1] * z)];
      }
    }
  }
  // RAS affine diag(s) with the volume centred on the world origin.
  Affine ras_affine = Affine::Identity();
  for (int i = 0; i < 3; ++i) {
    ras_affine(i, i) = s[i];
    ras_affine(i, 3) = -0.5 * s[i] * (static_cast<double>(d[i]) - 1.0);
  }
  Affine flip = Affine::Identity();
  for (int i = 0; i < 2; ++i) {
    flip(i, i) = -1.0;
    flip(i, 3) = static_cast<double>(d[i]) - 1.0;
  }
  return Volume(d, s, ras_affine * flip, std::move(out));
}

}  // namespace

double lesion_enhancement(LesionClass label, double amplitude, int t, int n) {
  const double frac = n > 1 ? static_cast<double>(t - 1) / static_cast<double>(n - 1) : 0.0;
  switch (label) {
    case LesionClass::Malignant: return amplitude * (1.0 - 0.45 * frac);
    case LesionClass::Benign: return amplitude * (0.35 + 0.65 * frac);
    case LesionClass::NoLesion: return 0.0;
  }
  return 0.0;
}

PhantomStudy make_phantom_study(std::size_t index, std::uint64_t seed, const PhantomOptions& opt) {
  const Dims3& d = opt.dims;
  if (d[0] < 8 || d[1] < 8 || d[2] < 2) throw Error(ErrorCode::InvalidArgument, "phantom dims too small");
  CounterRng rng(seed, 0x5048414Eull + index);  // per-study stream
  const Layout L = layout_for(d);

  PhantomStudy ps;
  char id[32];
  std::snprintf(id, sizeof(id), "P%04zu", index);
  ps.study.patient_id = id;
  ps.study.label_left = static_cast<LesionClass>(index % 3);
  ps.study.label_right = static_cast<LesionClass>((index / 3 + 2 * index) % 3);
  const int n_post = 2 + static_cast<int>(rng.below(6));  // 2..7

  // The patient side stored at low x follows the laterality convention.
  for (Side side : {Side::Left, Side::Right}) {
    const int half = side == opt.low_x_side ? 0 : 1;
    PhantomLesion& les = ps.lesions[side == Side::Left ? 0 : 1];
    les.label = side == Side::Left ? ps.study.label_left : ps.study.label_right;
    if (les.label == LesionClass::NoLesion) continue;
    les.radius = {rng.uniform(0.05, 0.08) * static_cast<double>(d[0]), rng.uniform(0.05, 0.08) * static_cast<double>(d[1]),
                  std::max(1.0, 0.2 * static_cast<double>(d[2]))};
    les.center = {L.breast_cx[static_cast<std::size_t>(half)] + rng.uniform(-0.35, 0.35) * L.breast_rx,
                  L.chest_y1 + rng.uniform(0.25, 0.6) * L.breast_ry, L.cz + rng.uniform(-0.15, 0.15) * L.breast_rz};
    les.amplitude = rng.uniform(110.0, 150.0);
  }

  const std::size_t count = d[0] * d[1] * d[2];
  std::vector<float> mask(count, 0.0f);
  std::vector<double> base(count, 0.0);
  std::vector<std::uint8_t> tissue(count, 0);  // 0 air, 1 chest, 2 breast
  std::vector<std::array<double, 2>> lesion_weight(count, {0.0, 0.0});
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      for (std::size_t x = 0; x < d[0]; ++x) {
        const std::size_t i = x + d[0] * (y + d[1] * z);
        const double fx = double(x), fy = double(y), fz = double(z);
        if (fy >= L.chest_y0 && fy < L.chest_y1) {
          tissue[i] = 1;
          base[i] = kChestBase;
        }
        for (int half = 0; half < 2; ++half) {
          if (!in_breast(L, half, fx, fy, fz)) continue;
          tissue[i] = 2;
          base[i] = kBreastBase;
          mask[i] = 1.0f;
        }
        for (int s = 0; s < 2; ++s) {
          const auto& les = ps.lesions[static_cast<std::size_t>(s)];
          if (les.label == LesionClass::NoLesion) continue;
          double r2 = 0.0;
          for (int a = 0; a < 3; ++a) {
            const double v = (std::array<double, 3>{fx, fy, fz}[a] - les.center[a]) / les.radius[a];
            r2 += v * v;
          }
          if (r2 <= 1.0 && tissue[i] == 2) lesion_weight[i][static_cast<std::size_t>(s)] = 1.0 - 0.5 * r2;
        }
      }
    }
  }

  auto phase = [&](int t) {
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      double v = base[i];
      if (t > 0) {
        const double frac = static_cast<double>(t) / static_cast<double>(n_post);
        if (tissue[i] == 1) v += kChestUptake;
        if (tissue[i] == 2) v += kBreastUptake * std::sqrt(frac);
        for (int s = 0; s < 2; ++s) {
          const auto& les = ps.lesions[static_cast<std::size_t>(s)];
          const double w = lesion_weight[i][static_cast<std::size_t>(s)];
          if (w > 0.0) v += w * lesion_enhancement(les.label, les.amplitude, t, n_post);
        }
      }
      if (tissue[i] != 0) v += opt.noise_sigma * rng.normal();
      out[i] = static_cast<float>(std::max(0.0, std::round(v)));
    }
    return std::make_shared<const Volume>(to_lps(out, d, opt.spacing));
  };

  ps.study.pre = phase(0);
  for (int t = 1; t <= n_post; ++t) ps.study.posts.push_back(phase(t));
  ps.study.mask = std::make_shared<const Volume>(to_lps(mask, d, opt.spacing));
  return ps;
}

std::vector<ManifestEntry> write_phantom_set(const std::filesystem::path& out_dir, std::size_t n, std::uint64_t seed,
                                             const PhantomOptions& opt) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "phantom count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string());

  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    const PhantomStudy ps = make_phantom_study(i, seed, opt);
    const std::string pid = ps.study.patient_id;
    std::filesystem::create_directories(out_dir / pid, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (out_dir / pid).string());

    ManifestEntry e;
    e.patient_id = pid;
    e.pre_path = pid + "/pre.nii.gz";
    write_nifti(*ps.study.pre, out_dir / e.pre_path, NiftiDtype::Int16);
    for (std::size_t t = 0; t < ps.study.posts.size(); ++t) {
      const std::string rel = pid + "/post" + std::to_string(t + 1) + ".nii.gz";
      write_nifti(*ps.study.posts[t], out_dir / rel, NiftiDtype::Int16);
      e.post_paths.push_back(rel);
    }
    e.mask_path = pid + "/mask.nii.gz";
    write_nifti(*ps.study.mask, out_dir / *e.mask_path, NiftiDtype::UInt8);
    e.label_left = ps.study.label_left;
    e.label_right = ps.study.label_right;
    entries.push_back(std::move(e));
  }
  detail::write_text_atomic(out_dir / "manifest.csv", Manifest::to_csv(entries));
  return entries;
}

}  // namespace mipcls
