#include "io_util.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include <zlib.h>

#include "mipcls/error.hpp"

namespace mipcls::detail {

static_assert(std::endian::native == std::endian::little,
              "mipcls file formats assume a little-endian host");

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof(buf));
    if (n < 0) {
      gzclose(f);
      throw Error(ErrorCode::IoFailure, "read error in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  gzclose(f);
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
                       bool gzip) {
  if (path.empty()) throw Error(ErrorCode::IoFailure, "empty output path");
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  if (gzip) {
    gzFile f = gzopen(tmp.string().c_str(), "wb6");
    if (f == nullptr) throw Error(ErrorCode::IoFailure, "cannot open " + tmp.string());
    std::size_t done = 0;
    while (done < bytes.size()) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 20));
      if (gzwrite(f, bytes.data() + done, chunk) != static_cast<int>(chunk)) {
        gzclose(f);
        throw Error(ErrorCode::IoFailure, "write error in " + tmp.string());
      }
      done += chunk;
    }
    if (gzclose(f) != Z_OK) throw Error(ErrorCode::IoFailure, "close error in " + tmp.string());
  } else {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw Error(ErrorCode::IoFailure, "write error in " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoFailure, "cannot rename onto " + path.string());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace mipcls::detail
