#include <cstring>
#include <filesystem>

#include "io_util.hpp"
#include "mipcls/error.hpp"
#include "mipcls/tensorio.hpp"

namespace mipcls {

namespace {
constexpr char kBlobMagic[4] = {'M', 'C', 'T', '1'};
}

std::size_t dtype_size(BlobDtype dt) noexcept {
  switch (dt) {
    case BlobDtype::Float32: return 4;
    case BlobDtype::UInt8: return 1;
  }
  return 0;
}

std::size_t TensorBlob::element_count() const noexcept {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

TensorBlob TensorBlob::from_f32(std::vector<std::uint32_t> dims, std::span<const float> values,
                                nlohmann::json meta) {
  TensorBlob b;
  b.dtype = BlobDtype::Float32;
  b.dims = std::move(dims);
  if (b.element_count() != values.size()) {
    throw Error(ErrorCode::LengthMismatch, "values do not match blob dims");
  }
  b.payload.resize(values.size() * sizeof(float));
  std::memcpy(b.payload.data(), values.data(), b.payload.size());
  b.meta = std::move(meta);
  return b;
}

std::vector<float> TensorBlob::as_f32() const {
  if (dtype != BlobDtype::Float32) throw Error(ErrorCode::UnsupportedDtype, "blob is not float32");
  if (payload.size() != element_count() * sizeof(float)) {
    throw Error(ErrorCode::LengthMismatch, "blob payload does not match dims");
  }
  std::vector<float> out(element_count());
  std::memcpy(out.data(), payload.data(), payload.size());
  return out;
}

std::vector<std::uint8_t> encode_blob(const TensorBlob& blob) {
  if (blob.dims.empty() || blob.dims.size() > 255) {
    throw Error(ErrorCode::InvalidArgument, "blob ndim must be in 1..255");
  }
  if (blob.payload.size() != blob.element_count() * dtype_size(blob.dtype)) {
    throw Error(ErrorCode::LengthMismatch, "blob payload does not match dims");
  }
  std::vector<std::uint8_t> out(6 + 4 * blob.dims.size());
  std::memcpy(out.data(), kBlobMagic, 4);
  out[4] = static_cast<std::uint8_t>(blob.dtype);
  out[5] = static_cast<std::uint8_t>(blob.dims.size());
  for (std::size_t i = 0; i < blob.dims.size(); ++i) detail::store_le<std::uint32_t>(out, 6 + 4 * i, blob.dims[i]);
  out.insert(out.end(), blob.payload.begin(), blob.payload.end());
  return out;
}

TensorBlob decode_blob(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kBlobMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "missing MCT1 magic");
  }
  TensorBlob b;
  const std::uint8_t dt = bytes[4];
  if (dt != 1 && dt != 2) throw Error(ErrorCode::UnsupportedDtype, "blob dtype code " + std::to_string(dt));
  b.dtype = static_cast<BlobDtype>(dt);
  const std::size_t ndim = bytes[5];
  if (ndim == 0) throw Error(ErrorCode::BadMagic, "blob ndim is zero");
  const std::size_t header = 6 + 4 * ndim;
  if (bytes.size() < header) throw Error(ErrorCode::LengthMismatch, "blob header truncated");
  b.dims.resize(ndim);
  // Guard the element count against overflow before comparing sizes.
  unsigned __int128 expected = dtype_size(b.dtype);
  for (std::size_t i = 0; i < ndim; ++i) {
    b.dims[i] = detail::load_le<std::uint32_t>(bytes, 6 + 4 * i);
    expected *= b.dims[i];
  }
  if (expected != static_cast<unsigned __int128>(bytes.size() - header)) {
    throw Error(ErrorCode::LengthMismatch, "blob payload length does not match dims");
  }
  b.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return b;
}

std::filesystem::path blob_sidecar_path(const std::filesystem::path& blob_path) {
  std::filesystem::path p = blob_path;
  p.replace_extension(".json");
  return p;
}

void write_blob(const TensorBlob& blob, const std::filesystem::path& path) {
  const auto bytes = encode_blob(blob);
  detail::write_file_atomic(path, bytes);
  if (!blob.meta.is_null()) {
    detail::write_text_atomic(blob_sidecar_path(path), blob.meta.dump(2) + "\n");
  }
}

TensorBlob read_blob(const std::filesystem::path& path) {
  TensorBlob b = decode_blob(detail::read_file_bytes(path));
  const auto sidecar = blob_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    const auto text = detail::read_file_bytes(sidecar);
    try {
      b.meta = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, "bad blob sidecar " + sidecar.string() + ": " + e.what());
    }
  }
  return b;
}

}  // namespace mipcls
