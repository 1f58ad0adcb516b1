#include <algorithm>
#include <cmath>
#include <limits>
#include <cstring>
#include <string>

#include <Eigen/LU>

#include "io_util.hpp"
#include "mipcls/error.hpp"
#include "mipcls/tensorio.hpp"

namespace mipcls {

namespace {

using detail::load_le;
using detail::store_le;

// Byte offsets into the 348-byte NIfTI-1 header.
namespace off {
constexpr std::size_t sizeof_hdr = 0;
constexpr std::size_t dim = 40;
constexpr std::size_t datatype = 70;
constexpr std::size_t bitpix = 72;
constexpr std::size_t pixdim = 76;
constexpr std::size_t vox_offset = 108;
constexpr std::size_t scl_slope = 112;
constexpr std::size_t scl_inter = 116;
constexpr std::size_t xyzt_units = 123;
constexpr std::size_t qform_code = 252;
constexpr std::size_t sform_code = 254;
constexpr std::size_t quatern_b = 256;
constexpr std::size_t qoffset_x = 268;
constexpr std::size_t srow_x = 280;
constexpr std::size_t magic = 344;
}  // namespace off

struct Header {
  Dims3 dims{1, 1, 1};
  NiftiDtype dtype = NiftiDtype::Float32;
  std::array<float, 8> pixdim{};
  double vox_offset = 0.0;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<float, 6> quatern{};  // b, c, d, qoffset x, y, z
  std::array<float, 12> srow{};
  bool single_file = true;
};

std::size_t dtype_bytes(NiftiDtype dt) {
  switch (dt) {
    case NiftiDtype::UInt8: return 1;
    case NiftiDtype::Int16: return 2;
    case NiftiDtype::Int32: return 4;
    case NiftiDtype::Float32: return 4;
    case NiftiDtype::Float64: return 8;
  }
  return 0;
}

Header decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kNiftiHeaderSize) {
    throw Error(ErrorCode::TruncatedPayload, "file shorter than the 348-byte NIfTI-1 header");
  }
  const auto sizeof_hdr = load_le<std::int32_t>(bytes, off::sizeof_hdr);
  if (sizeof_hdr != 348) {
    if (__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == 348u) {
      throw Error(ErrorCode::UnsupportedLayout, "big-endian NIfTI files are not supported");
    }
    throw Error(ErrorCode::BadMagic, "sizeof_hdr is not 348");
  }
  const char* magic = reinterpret_cast<const char*>(bytes.data() + off::magic);
  Header h;
  if (std::memcmp(magic, "n+1\0", 4) == 0) {
    h.single_file = true;
  } else if (std::memcmp(magic, "ni1\0", 4) == 0) {
    h.single_file = false;
  } else {
    throw Error(ErrorCode::BadMagic, "magic is neither \"n+1\" nor \"ni1\"");
  }

  std::array<std::int16_t, 8> dim{};
  for (std::size_t i = 0; i < 8; ++i) dim[i] = load_le<std::int16_t>(bytes, off::dim + 2 * i);
  if (dim[0] < 1 || dim[0] > 7) {
    throw Error(ErrorCode::UnsupportedLayout, "dim[0] outside 1..7 (big-endian or corrupt header)");
  }
  for (int i = 1; i <= dim[0]; ++i) {
    if (dim[i] < 1) throw Error(ErrorCode::InvalidHeader, "non-positive dimension");
    if (i > 3 && dim[i] != 1) {
      throw Error(ErrorCode::UnsupportedLayout, "only 3D volumes are supported");
    }
  }
  for (int i = 0; i < 3; ++i) h.dims[i] = (i + 1 <= dim[0]) ? static_cast<std::size_t>(dim[i + 1]) : 1;

  const auto datatype = load_le<std::int16_t>(bytes, off::datatype);
  switch (datatype) {
    case 2: case 4: case 8: case 16: case 64:
      h.dtype = static_cast<NiftiDtype>(datatype);
      break;
    default:
      throw Error(ErrorCode::UnsupportedDtype, "NIfTI datatype " + std::to_string(datatype));
  }

  for (std::size_t i = 0; i < 8; ++i) h.pixdim[i] = load_le<float>(bytes, off::pixdim + 4 * i);
  h.vox_offset = load_le<float>(bytes, off::vox_offset);
  h.scl_slope = load_le<float>(bytes, off::scl_slope);
  h.scl_inter = load_le<float>(bytes, off::scl_inter);
  h.qform_code = load_le<std::int16_t>(bytes, off::qform_code);
  h.sform_code = load_le<std::int16_t>(bytes, off::sform_code);
  for (std::size_t i = 0; i < 6; ++i) h.quatern[i] = load_le<float>(bytes, off::quatern_b + 4 * i);
  for (std::size_t i = 0; i < 12; ++i) h.srow[i] = load_le<float>(bytes, off::srow_x + 4 * i);

  if (!std::isfinite(h.vox_offset) || h.vox_offset < 0.0) {
    throw Error(ErrorCode::InvalidHeader, "invalid vox_offset");
  }
  if (h.single_file && h.vox_offset < static_cast<double>(kNiftiVoxOffset)) {
    h.vox_offset = static_cast<double>(kNiftiVoxOffset);
  }
  return h;
}

Affine qform_affine(const Header& h) {
  double b = h.quatern[0], c = h.quatern[1], d = h.quatern[2];
  double a2 = 1.0 - (b * b + c * c + d * d);
  double a = 0.0;
  if (a2 < 1e-7) {
    const double n = std::sqrt(b * b + c * c + d * d);
    if (n > 0) {
      b /= n;
      c /= n;
      d /= n;
    }
  } else {
    a = std::sqrt(a2);
  }
  Eigen::Matrix3d r;
  r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
  const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
  Affine m = Affine::Identity();
  m.block<3, 1>(0, 0) = r.col(0) * static_cast<double>(h.pixdim[1]);
  m.block<3, 1>(0, 1) = r.col(1) * static_cast<double>(h.pixdim[2]);
  m.block<3, 1>(0, 2) = r.col(2) * static_cast<double>(h.pixdim[3]) * qfac;
  for (int i = 0; i < 3; ++i) m(i, 3) = h.quatern[3 + i];
  return m;
}

Affine header_affine(const Header& h) {
  Affine m = Affine::Identity();
  if (h.sform_code > 0) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) m(r, c) = h.srow[r * 4 + c];
    }
  } else if (h.qform_code > 0) {
    m = qform_affine(h);
  } else {
    for (int i = 0; i < 3; ++i) m(i, i) = h.pixdim[i + 1];
  }
  const double det = m.topLeftCorner<3, 3>().determinant();
  if (!m.allFinite() || !std::isfinite(det) || std::abs(det) <= 1e-12) {
    throw Error(ErrorCode::NonInvertibleAffine, "header affine is singular or non-finite");
  }
  return m;
}

Spacing3 header_spacing(const Header& h, const Affine& m) {
  Spacing3 s{};
  for (int i = 0; i < 3; ++i) {
    double v = std::abs(static_cast<double>(h.pixdim[i + 1]));
    if (!(v > 0.0) || !std::isfinite(v)) v = m.block<3, 1>(0, i).norm();
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidHeader, "invalid voxel spacing");
    s[i] = v;
  }
  return s;
}

template <typename T>
void convert(std::span<const std::uint8_t> raw, std::vector<float>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(load_le<T>(raw, i * sizeof(T)));
  }
}

Volume decode_volume(const Header& h, std::span<const std::uint8_t> payload_source,
                     std::size_t offset) {
  const std::size_t count = h.dims[0] * h.dims[1] * h.dims[2];
  const std::size_t need = count * dtype_bytes(h.dtype);
  if (offset > payload_source.size() || payload_source.size() - offset < need) {
    throw Error(ErrorCode::TruncatedPayload, "voxel payload shorter than header dimensions");
  }
  const Affine affine = header_affine(h);
  const Spacing3 spacing = header_spacing(h, affine);
  const auto raw = payload_source.subspan(offset, need);

  std::vector<float> data(count);
  switch (h.dtype) {
    case NiftiDtype::UInt8: convert<std::uint8_t>(raw, data); break;
    case NiftiDtype::Int16: convert<std::int16_t>(raw, data); break;
    case NiftiDtype::Int32: convert<std::int32_t>(raw, data); break;
    case NiftiDtype::Float32: convert<float>(raw, data); break;
    case NiftiDtype::Float64: convert<double>(raw, data); break;
  }

  // scl_slope == 0 means unscaled.
  if (std::isfinite(h.scl_slope) && h.scl_slope != 0.0f) {
    const double slope = h.scl_slope;
    const double inter = std::isfinite(h.scl_inter) ? h.scl_inter : 0.0;
    for (float& v : data) v = static_cast<float>(slope * v + inter);
  }
  return Volume(h.dims, spacing, affine, std::move(data));
}

}  // namespace

Volume parse_nifti(std::span<const std::uint8_t> bytes) {
  const Header h = decode_header(bytes);
  if (!h.single_file) {
    throw Error(ErrorCode::UnsupportedLayout, "\"ni1\" header needs its separate .img file");
  }
  return decode_volume(h, bytes, static_cast<std::size_t>(h.vox_offset));
}

Volume read_nifti(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  const Header h = decode_header(bytes);
  if (h.single_file) return decode_volume(h, bytes, static_cast<std::size_t>(h.vox_offset));

  std::filesystem::path img = path;
  std::string name = path.filename().string();
  if (detail::ends_with(name, ".hdr.gz")) {
    img.replace_filename(name.substr(0, name.size() - 7) + ".img.gz");
  } else {
    img.replace_extension(".img");
  }
  const auto payload = detail::read_file_bytes(img);
  return decode_volume(h, payload, static_cast<std::size_t>(h.vox_offset));
}

namespace {

template <typename T>
void encode_integers(std::span<const float> values, std::vector<std::uint8_t>& bytes) {
  constexpr double lo = static_cast<double>(std::numeric_limits<T>::min());
  constexpr double hi = static_cast<double>(std::numeric_limits<T>::max());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double r = std::isnan(values[i]) ? 0.0 : std::clamp(std::nearbyint(static_cast<double>(values[i])), lo, hi);
    store_le<T>(bytes, kNiftiVoxOffset + i * sizeof(T), static_cast<T>(r));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_nifti(const Volume& v, NiftiDtype dtype) {
  const std::size_t elem = dtype_bytes(dtype);
  if (dtype != NiftiDtype::Float32 && dtype != NiftiDtype::Int16 && dtype != NiftiDtype::UInt8) {
    throw Error(ErrorCode::UnsupportedDtype, "writer supports float32, int16 and uint8");
  }
  std::vector<std::uint8_t> bytes(kNiftiVoxOffset + v.size() * elem, 0);
  store_le<std::int32_t>(bytes, off::sizeof_hdr, 348);
  store_le<std::int16_t>(bytes, off::dim, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    store_le<std::int16_t>(bytes, off::dim + 2 * (i + 1), static_cast<std::int16_t>(v.dims()[i]));
  }
  for (std::size_t i = 4; i < 8; ++i) store_le<std::int16_t>(bytes, off::dim + 2 * i, 1);
  store_le<std::int16_t>(bytes, off::datatype, static_cast<std::int16_t>(dtype));
  store_le<std::int16_t>(bytes, off::bitpix, static_cast<std::int16_t>(8 * elem));
  store_le<float>(bytes, off::pixdim, 1.0f);
  for (std::size_t i = 0; i < 3; ++i) {
    store_le<float>(bytes, off::pixdim + 4 * (i + 1), static_cast<float>(v.spacing()[i]));
  }
  store_le<float>(bytes, off::vox_offset, static_cast<float>(kNiftiVoxOffset));
  store_le<float>(bytes, off::scl_slope, 0.0f);
  store_le<float>(bytes, off::scl_inter, 0.0f);
  bytes[off::xyzt_units] = 2;  // millimetres
  store_le<std::int16_t>(bytes, off::qform_code, 0);
  store_le<std::int16_t>(bytes, off::sform_code, 2);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      store_le<float>(bytes, off::srow_x + 4 * static_cast<std::size_t>(r * 4 + c),
                      static_cast<float>(v.affine()(r, c)));
    }
  }
  std::memcpy(bytes.data() + off::magic, "n+1\0", 4);
  switch (dtype) {
    case NiftiDtype::Float32:
      std::memcpy(bytes.data() + kNiftiVoxOffset, v.data().data(), v.size() * sizeof(float));
      break;
    case NiftiDtype::Int16: encode_integers<std::int16_t>(v.data(), bytes); break;
    case NiftiDtype::UInt8: encode_integers<std::uint8_t>(v.data(), bytes); break;
    default: break;
  }
  return bytes;
}

void write_nifti(const Volume& v, const std::filesystem::path& path, NiftiDtype dtype) {
  if (v.dims()[0] > 32767 || v.dims()[1] > 32767 || v.dims()[2] > 32767) {
    throw Error(ErrorCode::InvalidArgument, "volume too large for NIfTI-1 dims");
  }
  const auto bytes = encode_nifti(v, dtype);
  detail::write_file_atomic(path, bytes, detail::ends_with(path.string(), ".gz"));
}

}  // namespace mipcls
