#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mipcls/volume.hpp"

namespace mipcls {

// ---------------------------------------------------------------------------
// NIfTI-1
// ---------------------------------------------------------------------------

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiVoxOffset = 352;

/// On-disk NIfTI datatype codes accepted by the reader.
enum class NiftiDtype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
};

/// Reads a little-endian, 3D NIfTI-1 file (".nii", ".nii.gz", or a
/// ".hdr"/".img" pair). The sform is used when sform_code > 0, otherwise
/// the qform, otherwise diag(pixdim). Voxels are scaled by scl_slope and
/// scl_inter when scl_slope is finite and non-zero.
Volume read_nifti(const std::filesystem::path& path);

/// Parses an in-memory single-file NIfTI-1 image. Never reads outside
/// `bytes`; malformed input raises mipcls::Error.
Volume parse_nifti(std::span<const std::uint8_t> bytes);

/// Writes a single-file NIfTI-1 image with sform_code = 2. Paths ending in
/// ".gz" are gzip-compressed. The write is atomic (temp + rename). Integer
/// dtypes round and saturate; only Float32 round-trips bit-exactly.
void write_nifti(const Volume& v, const std::filesystem::path& path,
                 NiftiDtype dtype = NiftiDtype::Float32);

/// Serializes a volume to NIfTI-1 bytes (uncompressed).
std::vector<std::uint8_t> encode_nifti(const Volume& v, NiftiDtype dtype = NiftiDtype::Float32);

// ---------------------------------------------------------------------------
// TensorBlob ("MCT1")
// ---------------------------------------------------------------------------

enum class BlobDtype : std::uint8_t { Float32 = 1, UInt8 = 2 };

std::size_t dtype_size(BlobDtype dt) noexcept;

/// N-dimensional row-major tensor with JSON metadata.
///
/// Layout: "MCT1", u8 dtype, u8 ndim, ndim x u32 LE dims, payload.
/// Metadata lives in a sidecar "<stem>.json" next to the blob.
struct TensorBlob {
  BlobDtype dtype = BlobDtype::Float32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
  nlohmann::json meta;

  std::size_t element_count() const noexcept;

  static TensorBlob from_f32(std::vector<std::uint32_t> dims, std::span<const float> values,
                             nlohmann::json meta = nullptr);
  std::vector<float> as_f32() const;
};

std::vector<std::uint8_t> encode_blob(const TensorBlob& blob);
TensorBlob decode_blob(std::span<const std::uint8_t> bytes);

/// Sidecar path for a blob: the blob path with its extension replaced by ".json".
std::filesystem::path blob_sidecar_path(const std::filesystem::path& blob_path);

/// Writes the blob and, when meta is not null, its JSON sidecar.
void write_blob(const TensorBlob& blob, const std::filesystem::path& path);
/// Reads the blob and its sidecar if one exists.
TensorBlob read_blob(const std::filesystem::path& path);

}  // namespace mipcls
