#include "mipcls/augment.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mipcls/error.hpp"
#include "mipcls/rng.hpp"

namespace mipcls {

namespace {

enum TransformIndex : std::uint64_t {
  kHFlip = 0,
  kVFlip,
  kRotate,
  kAffine,
  kBrightnessContrast,
  kNoise,
  kBlur,
  kDropout,
};

constexpr double kDegToRad = std::numbers::pi / 180.0;

void flip(MipStack& m, bool horizontal) {
  for (std::size_t c = 0; c < kStackChannels; ++c) {
    auto ch = m.channel(c);
    for (std::size_t y = 0; y < m.height; ++y) {
      if (horizontal) {
        std::reverse(ch.begin() + static_cast<std::ptrdiff_t>(y * m.width),
                     ch.begin() + static_cast<std::ptrdiff_t>((y + 1) * m.width));
      } else if (y < m.height / 2) {
        std::swap_ranges(ch.begin() + static_cast<std::ptrdiff_t>(y * m.width),
                         ch.begin() + static_cast<std::ptrdiff_t>((y + 1) * m.width),
                         ch.begin() + static_cast<std::ptrdiff_t>((m.height - 1 - y) * m.width));
      }
    }
  }
}

// in = inv * (out - center - shift) + center, bilinear with edge clamp.
void warp(MipStack& m, const Eigen::Matrix2d& inv, const Eigen::Vector2d& shift) {
  const Eigen::Vector2d center((static_cast<double>(m.width) - 1.0) / 2.0,
                               (static_cast<double>(m.height) - 1.0) / 2.0);
  const double max_x = static_cast<double>(m.width) - 1.0;
  const double max_y = static_cast<double>(m.height) - 1.0;
  std::vector<float> src(m.plane());
  for (std::size_t c = 0; c < kStackChannels; ++c) {
    auto ch = m.channel(c);
    std::copy(ch.begin(), ch.end(), src.begin());
    for (std::size_t y = 0; y < m.height; ++y) {
      for (std::size_t x = 0; x < m.width; ++x) {
        const Eigen::Vector2d p =
            inv * (Eigen::Vector2d(double(x), double(y)) - center - shift) + center;
        const double sx = std::clamp(p.x(), 0.0, max_x);
        const double sy = std::clamp(p.y(), 0.0, max_y);
        const auto x0 = static_cast<std::size_t>(std::floor(sx));
        const auto y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t x1 = std::min(x0 + 1, m.width - 1);
        const std::size_t y1 = std::min(y0 + 1, m.height - 1);
        const double fx = sx - static_cast<double>(x0);
        const double fy = sy - static_cast<double>(y0);
        const double top = src[y0 * m.width + x0] + fx * (src[y0 * m.width + x1] - src[y0 * m.width + x0]);
        const double bot = src[y1 * m.width + x0] + fx * (src[y1 * m.width + x1] - src[y1 * m.width + x0]);
        ch[y * m.width + x] = static_cast<float>(top + fy * (bot - top));
      }
    }
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

void blur(MipStack& m, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const auto w = static_cast<std::ptrdiff_t>(m.width);
  const auto h = static_cast<std::ptrdiff_t>(m.height);
  std::vector<float> tmp(m.plane());
  for (std::size_t c = 0; c < kStackChannels; ++c) {
    auto ch = m.channel(c);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          const std::ptrdiff_t xx = std::clamp(x + i, std::ptrdiff_t{0}, w - 1);
          acc += k[static_cast<std::size_t>(i + radius)] * ch[static_cast<std::size_t>(y * w + xx)];
        }
        tmp[static_cast<std::size_t>(y * w + x)] = static_cast<float>(acc);
      }
    }
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          const std::ptrdiff_t yy = std::clamp(y + i, std::ptrdiff_t{0}, h - 1);
          acc += k[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(yy * w + x)];
        }
        ch[static_cast<std::size_t>(y * w + x)] = static_cast<float>(acc);
      }
    }
  }
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be in [0, 1]");
}

void check_finite_nonneg(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be finite and >= 0");
}

}  // namespace

void AugmentPolicy::validate() const {
  check_probability(hflip_p, "hflip_p");
  check_probability(vflip_p, "vflip_p");
  check_probability(rotate_p, "rotate_p");
  check_probability(affine_p, "affine_p");
  check_probability(brightness_contrast_p, "brightness_contrast_p");
  check_probability(noise_p, "noise_p");
  check_probability(blur_p, "blur_p");
  check_probability(dropout_p, "dropout_p");
  check_finite_nonneg(rotate_max_deg, "rotate_max_deg");
  check_finite_nonneg(shear_max_deg, "shear_max_deg");
  check_finite_nonneg(translate_frac, "translate_frac");
  check_finite_nonneg(brightness_delta, "brightness_delta");
  check_finite_nonneg(contrast_delta, "contrast_delta");
  check_finite_nonneg(noise_sigma_max, "noise_sigma_max");
  check_finite_nonneg(blur_sigma_max, "blur_sigma_max");
  if (!(scale_min > 0.0) || !std::isfinite(scale_max) || scale_max < scale_min) {
    throw Error(ErrorCode::InvalidArgument, "scale range must satisfy 0 < scale_min <= scale_max");
  }
  if (shear_max_deg >= 89.0) throw Error(ErrorCode::InvalidArgument, "shear_max_deg must be < 89");
}

void to_json(nlohmann::json& j, const AugmentPolicy& p) {
  j = {{"hflip_p", p.hflip_p},
       {"vflip_p", p.vflip_p},
       {"rotate_p", p.rotate_p},
       {"rotate_max_deg", p.rotate_max_deg},
       {"affine_p", p.affine_p},
       {"scale_min", p.scale_min},
       {"scale_max", p.scale_max},
       {"shear_max_deg", p.shear_max_deg},
       {"translate_frac", p.translate_frac},
       {"brightness_contrast_p", p.brightness_contrast_p},
       {"brightness_delta", p.brightness_delta},
       {"contrast_delta", p.contrast_delta},
       {"noise_p", p.noise_p},
       {"noise_sigma_max", p.noise_sigma_max},
       {"blur_p", p.blur_p},
       {"blur_sigma_max", p.blur_sigma_max},
       {"dropout_p", p.dropout_p},
       {"dropout_max_holes", p.dropout_max_holes},
       {"dropout_max_size", p.dropout_max_size}};
}

void from_json(const nlohmann::json& j, AugmentPolicy& p) {
  AugmentPolicy d = p;
  p.hflip_p = j.value("hflip_p", d.hflip_p);
  p.vflip_p = j.value("vflip_p", d.vflip_p);
  p.rotate_p = j.value("rotate_p", d.rotate_p);
  p.rotate_max_deg = j.value("rotate_max_deg", d.rotate_max_deg);
  p.affine_p = j.value("affine_p", d.affine_p);
  p.scale_min = j.value("scale_min", d.scale_min);
  p.scale_max = j.value("scale_max", d.scale_max);
  p.shear_max_deg = j.value("shear_max_deg", d.shear_max_deg);
  p.translate_frac = j.value("translate_frac", d.translate_frac);
  p.brightness_contrast_p = j.value("brightness_contrast_p", d.brightness_contrast_p);
  p.brightness_delta = j.value("brightness_delta", d.brightness_delta);
  p.contrast_delta = j.value("contrast_delta", d.contrast_delta);
  p.noise_p = j.value("noise_p", d.noise_p);
  p.noise_sigma_max = j.value("noise_sigma_max", d.noise_sigma_max);
  p.blur_p = j.value("blur_p", d.blur_p);
  p.blur_sigma_max = j.value("blur_sigma_max", d.blur_sigma_max);
  p.dropout_p = j.value("dropout_p", d.dropout_p);
  p.dropout_max_holes = j.value("dropout_max_holes", d.dropout_max_holes);
  p.dropout_max_size = j.value("dropout_max_size", d.dropout_max_size);
}

AugmentPolicy default_policy() {
  AugmentPolicy p;
  p.hflip_p = 0.5;
  p.vflip_p = 0.5;
  p.rotate_p = 0.5;
  p.rotate_max_deg = 15.0;
  p.affine_p = 0.5;
  p.scale_min = 0.9;
  p.scale_max = 1.1;
  p.shear_max_deg = 10.0;
  p.translate_frac = 0.05;
  p.brightness_contrast_p = 0.5;
  p.brightness_delta = 0.2;
  p.contrast_delta = 0.2;
  p.noise_p = 0.5;
  p.noise_sigma_max = 0.05;
  p.blur_p = 0.5;
  p.blur_sigma_max = 1.5;
  p.dropout_p = 0.5;
  p.dropout_max_holes = 8;
  p.dropout_max_size = 32;
  return p;
}

float dropout_fill(const MipStack& m, std::size_t c) {
  if (!m.normalized) return 0.0f;
  return static_cast<float>((0.0 - m.norm.means[c]) / m.norm.stds[c]);
}

AugmentResult augment(const MipStack& m, std::uint64_t seed, const AugmentPolicy& policy) {
  policy.validate();
  AugmentResult r{m, nlohmann::json::array()};
  MipStack& out = r.stack;
  if (out.plane() == 0) return r;
  const double w = static_cast<double>(out.width);
  const double h = static_cast<double>(out.height);

  if (CounterRng rng(seed, kHFlip); rng.uniform() < policy.hflip_p) {
    flip(out, true);
    r.applied.push_back({{"name", "hflip"}});
  }
  if (CounterRng rng(seed, kVFlip); rng.uniform() < policy.vflip_p) {
    flip(out, false);
    r.applied.push_back({{"name", "vflip"}});
  }
  if (CounterRng rng(seed, kRotate); rng.uniform() < policy.rotate_p) {
    const double deg = rng.uniform(-policy.rotate_max_deg, policy.rotate_max_deg);
    const double t = deg * kDegToRad;
    Eigen::Matrix2d inv;
    inv << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    warp(out, inv, Eigen::Vector2d::Zero());
    r.applied.push_back({{"name", "rotate"}, {"degrees", deg}});
  }
  if (CounterRng rng(seed, kAffine); rng.uniform() < policy.affine_p) {
    const double scale = rng.uniform(policy.scale_min, policy.scale_max);
    const double shear = rng.uniform(-policy.shear_max_deg, policy.shear_max_deg);
    const double tx = rng.uniform(-policy.translate_frac, policy.translate_frac) * w;
    const double ty = rng.uniform(-policy.translate_frac, policy.translate_frac) * h;
    Eigen::Matrix2d fwd;
    fwd << scale, scale * std::tan(shear * kDegToRad), 0.0, scale;
    warp(out, fwd.inverse(), Eigen::Vector2d(tx, ty));
    r.applied.push_back({{"name", "affine"}, {"scale", scale}, {"shear_degrees", shear}, {"translate", {tx, ty}}});
  }
  if (CounterRng rng(seed, kBrightnessContrast); rng.uniform() < policy.brightness_contrast_p) {
    const double alpha = 1.0 + rng.uniform(-policy.contrast_delta, policy.contrast_delta);
    const double beta = rng.uniform(-policy.brightness_delta, policy.brightness_delta);
    for (float& v : out.channels) v = static_cast<float>(alpha * v + beta);
    r.applied.push_back({{"name", "brightness_contrast"}, {"alpha", alpha}, {"beta", beta}});
  }
  if (CounterRng rng(seed, kNoise); rng.uniform() < policy.noise_p) {
    const double sigma = rng.uniform(0.0, policy.noise_sigma_max);
    for (float& v : out.channels) v = static_cast<float>(v + sigma * rng.normal());
    r.applied.push_back({{"name", "gaussian_noise"}, {"sigma", sigma}});
  }
  if (CounterRng rng(seed, kBlur); rng.uniform() < policy.blur_p) {
    const double sigma = rng.uniform(0.0, policy.blur_sigma_max);
    if (sigma > 1e-3) blur(out, sigma);
    r.applied.push_back({{"name", "gaussian_blur"}, {"sigma", sigma}});
  }
  if (CounterRng rng(seed, kDropout);
      rng.uniform() < policy.dropout_p && policy.dropout_max_holes > 0 && policy.dropout_max_size > 0) {
    const std::uint64_t holes = 1 + rng.below(policy.dropout_max_holes);
    nlohmann::json boxes = nlohmann::json::array();
    for (std::uint64_t i = 0; i < holes; ++i) {
      const std::size_t hh = 1 + rng.below(policy.dropout_max_size);
      const std::size_t hw = 1 + rng.below(policy.dropout_max_size);
      const std::size_t y0 = rng.below(out.height);
      const std::size_t x0 = rng.below(out.width);
      const std::size_t y1 = std::min(out.height, y0 + hh);
      const std::size_t x1 = std::min(out.width, x0 + hw);
      for (std::size_t c = 0; c < kStackChannels; ++c) {
        const float fill = dropout_fill(out, c);
        auto ch = out.channel(c);
        for (std::size_t y = y0; y < y1; ++y) {
          std::fill(ch.begin() + static_cast<std::ptrdiff_t>(y * out.width + x0),
                    ch.begin() + static_cast<std::ptrdiff_t>(y * out.width + x1), fill);
        }
      }
      boxes.push_back({y0, x0, y1 - y0, x1 - x0});
    }
    r.applied.push_back({{"name", "coarse_dropout"}, {"boxes", boxes}});
  }
  return r;
}

}  // namespace mipcls
