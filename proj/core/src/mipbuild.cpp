#include "mipcls/mipbuild.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/LU>

#include "mipcls/error.hpp"

namespace mipcls {

void NormConstants::validate() const {
  for (double s : stds) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "norm stds must be > 0");
  }
  for (double m : means) {
    if (!std::isfinite(m)) throw Error(ErrorCode::InvalidArgument, "norm means must be finite");
  }
}

PhaseSet select_phases(const Study& study) {
  if (!study.pre) throw Error(ErrorCode::MissingPre, "study " + study.patient_id + " has no pre-contrast volume");
  if (study.posts.size() < 2) {
    throw Error(ErrorCode::TooFewPhases, "study " + study.patient_id + " needs >= 2 post-contrast phases");
  }
  for (const auto& p : study.posts) {
    if (!p) throw Error(ErrorCode::InvalidArgument, "null post-contrast volume");
  }
  return PhaseSet{study.pre, study.posts[0], study.posts[1], study.posts.back()};
}

Volume apply_mask(const Volume& v, const Volume& mask) {
  for (float m : mask.data()) {
    if (!(m >= -1e-6f && m <= 1.0f + 1e-6f)) {
      throw Error(ErrorCode::NonBinaryMask, "mask values must lie in [0, 1]");
    }
  }
  std::vector<float> out(v.size());
  if (v.same_grid(mask)) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.data()[i] >= 0.5f ? v.data()[i] : 0.0f;
    return v.with_data(std::move(out));
  }

  const Affine to_mask = mask.affine().inverse() * v.affine();
  for (std::size_t z = 0; z < v.nz(); ++z) {
    for (std::size_t y = 0; y < v.ny(); ++y) {
      for (std::size_t x = 0; x < v.nx(); ++x) {
        const Eigen::Vector4d p = to_mask * Eigen::Vector4d(double(x), double(y), double(z), 1.0);
        bool inside = true;
        std::array<std::size_t, 3> idx{};
        for (int a = 0; a < 3; ++a) {
          // Half-way points round up; the epsilon absorbs affine round-off.
          const double r = std::floor(p[a] + 0.5 + 1e-6);
          if (r < 0.0 || r >= static_cast<double>(mask.dims()[a])) {
            inside = false;
            break;
          }
          idx[a] = static_cast<std::size_t>(r);
        }
        const std::size_t i = v.index(x, y, z);
        out[i] = (inside && mask.at(idx[0], idx[1], idx[2]) >= 0.5f) ? v.data()[i] : 0.0f;
      }
    }
  }
  return v.with_data(std::move(out));
}

Volume subtract_clamped(const Volume& post, const Volume& pre) {
  if (!post.same_grid(pre)) throw Error(ErrorCode::GridMismatch, "subtraction operands differ in grid");
  std::vector<float> out(post.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(post.data()[i] - pre.data()[i], 0.0f);
  return post.with_data(std::move(out));
}

Image2D mip_z(const Volume& v) {
  Image2D img{v.ny(), v.nx(), {}};
  const std::size_t plane = v.nx() * v.ny();
  img.data.assign(v.data().begin(), v.data().begin() + static_cast<std::ptrdiff_t>(plane));
  for (std::size_t z = 1; z < v.nz(); ++z) {
    const float* slice = v.data().data() + z * plane;
    for (std::size_t i = 0; i < plane; ++i) img.data[i] = std::max(img.data[i], slice[i]);
  }
  return img;
}

Volume standardize(const Volume& v, const StackConfig& cfg, Interp interp) {
  return crop_or_pad(resample(reorient_canonical(v), cfg.spacing, interp), cfg.shape, 0.0f);
}

std::array<MipStack, 2> build_stacks(const Study& study, const StackConfig& cfg) {
  const PhaseSet phases = select_phases(study);

  // post2 and last may alias; standardize each distinct volume once.
  std::map<const Volume*, Volume> standardized;
  for (const VolumePtr& p : {phases.pre, phases.post1, phases.post2, phases.last}) {
    if (!standardized.contains(p.get())) standardized.emplace(p.get(), standardize(*p, cfg, Interp::Trilinear));
  }
  const RowWindow window = localize_rows(standardized.at(phases.post1.get()), cfg.row_window);

  std::map<const Volume*, std::pair<Volume, Volume>> halves;
  for (const auto& [key, vol] : standardized) halves.emplace(key, split_lr(crop_window(vol, window)));
  std::optional<std::pair<Volume, Volume>> mask_halves;
  if (study.mask) {
    mask_halves = split_lr(crop_window(standardize(*study.mask, cfg, Interp::Nearest), window));
  }

  std::array<MipStack, 2> out;
  for (Side side : {Side::Left, Side::Right}) {
    const bool low = side == cfg.low_x_side;
    auto pick = [&](const VolumePtr& p) -> Volume {
      const auto& h = halves.at(p.get());
      const Volume& v = low ? h.first : h.second;
      if (!mask_halves) return v;
      return apply_mask(v, low ? mask_halves->first : mask_halves->second);
    };
    const Volume pre = pick(phases.pre);
    const Volume post1 = pick(phases.post1);
    const Volume post2 = pick(phases.post2);
    const Volume last = pick(phases.last);

    const std::array<Image2D, kStackChannels> mips{
        mip_z(post1), mip_z(subtract_clamped(post1, pre)), mip_z(subtract_clamped(post2, pre)),
        mip_z(subtract_clamped(last, pre))};

    MipStack& m = out[side == Side::Left ? 0 : 1];
    m.height = mips[0].height;
    m.width = mips[0].width;
    m.channels.reserve(kStackChannels * m.plane());
    for (const auto& img : mips) m.channels.insert(m.channels.end(), img.data.begin(), img.data.end());
    m.side = side;
    m.normalized = false;
    m.patient_id = study.patient_id;
    m.sources = study.sources;
    m.window_start = window.start;
    m.low_x_side = cfg.low_x_side;
  }
  return out;
}

MipStack build_stack(const Study& study, Side side, const StackConfig& cfg) {
  auto both = build_stacks(study, cfg);
  return std::move(both[side == Side::Left ? 0 : 1]);
}

MipStack normalize_stack(const MipStack& m, const NormConstants& nc) {
  if (m.normalized) throw Error(ErrorCode::AlreadyNormalized, "stack is already normalized");
  nc.validate();
  MipStack out = m;
  for (std::size_t c = 0; c < kStackChannels; ++c) {
    auto ch = out.channel(c);
    const auto [lo_it, hi_it] = std::minmax_element(ch.begin(), ch.end());
    const double lo = ch.empty() ? 0.0 : *lo_it;
    const double hi = ch.empty() ? 0.0 : *hi_it;
    const double range = hi - lo;
    for (float& x : ch) {
      const double unit = range > 0.0 ? (x - lo) / range : 0.0;
      x = static_cast<float>((unit - nc.means[c]) / nc.stds[c]);
    }
    out.channel_min[c] = lo;
    out.channel_max[c] = hi;
  }
  out.norm = nc;
  out.normalized = true;
  return out;
}

MipStack denormalize_stack(const MipStack& m) {
  if (!m.normalized) throw Error(ErrorCode::InvalidArgument, "stack is not normalized");
  MipStack out = m;
  for (std::size_t c = 0; c < kStackChannels; ++c) {
    const double range = m.channel_max[c] - m.channel_min[c];
    for (float& x : out.channel(c)) {
      const double unit = x * m.norm.stds[c] + m.norm.means[c];
      x = static_cast<float>(unit * range + m.channel_min[c]);
    }
  }
  out.normalized = false;
  return out;
}

nlohmann::json MipStack::metadata() const {
  nlohmann::json j;
  j["patient_id"] = patient_id;
  j["side"] = std::string(to_string(side));
  j["channels"] = std::vector<std::string>(kChannelNames.begin(), kChannelNames.end());
  j["height"] = height;
  j["width"] = width;
  j["normalized"] = normalized;
  if (normalized) {
    j["norm_means"] = norm.means;
    j["norm_stds"] = norm.stds;
    j["channel_min"] = channel_min;
    j["channel_max"] = channel_max;
  }
  j["window_start"] = window_start;
  j["laterality"] = {{"low_x_side", std::string(to_string(low_x_side))},
                     {"width_axis", "x (RAS)"},
                     {"height_axis", "y (RAS)"}};
  j["sources"] = sources;
  return j;
}

TensorBlob MipStack::to_blob() const {
  return TensorBlob::from_f32({static_cast<std::uint32_t>(kStackChannels), static_cast<std::uint32_t>(height),
                               static_cast<std::uint32_t>(width)},
                              channels, metadata());
}

MipStack MipStack::from_blob(const TensorBlob& blob) {
  if (blob.dims.size() != 3 || blob.dims[0] != kStackChannels) {
    throw Error(ErrorCode::SchemaMismatch, "MIP stack blob must have dims [4, H, W]");
  }
  MipStack m;
  m.height = blob.dims[1];
  m.width = blob.dims[2];
  m.channels = blob.as_f32();
  const auto& j = blob.meta;
  if (!j.is_object()) return m;
  try {
    m.patient_id = j.value("patient_id", std::string{});
    if (j.contains("side")) m.side = parse_side(j.at("side").get<std::string>());
    m.normalized = j.value("normalized", false);
    if (m.normalized) {
      m.norm.means = j.at("norm_means").get<std::array<double, kStackChannels>>();
      m.norm.stds = j.at("norm_stds").get<std::array<double, kStackChannels>>();
      m.channel_min = j.at("channel_min").get<std::array<double, kStackChannels>>();
      m.channel_max = j.at("channel_max").get<std::array<double, kStackChannels>>();
    }
    m.window_start = j.value("window_start", std::size_t{0});
    if (j.contains("laterality")) m.low_x_side = parse_side(j.at("laterality").at("low_x_side").get<std::string>());
    m.sources = j.value("sources", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("bad MIP stack metadata: ") + e.what());
  }
  return m;
}

}  // namespace mipcls
