// Copyright 2026 The volprep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "volprep/nifti_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace volprep::nifti {

namespace {

// Header field offsets, NIfTI-1.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffSrowY = 296;
constexpr std::size_t kOffSrowZ = 312;
constexpr std::size_t kOffMagic = 344;

template <typename T>
T byteswap_value(T value) noexcept {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  std::reverse(raw.begin(), raw.end());
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

constexpr bool host_is_big = std::endian::native == std::endian::big;

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool big) : bytes_(bytes), swap_(big != host_is_big) {}

  template <typename T>
  T get(std::size_t offset) const noexcept {
    T value;
    std::memcpy(&value, bytes_.data() + offset, sizeof(T));
    return swap_ ? byteswap_value(value) : value;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class Writer {
 public:
  Writer(std::span<std::uint8_t> bytes, bool big) : bytes_(bytes), swap_(big != host_is_big) {}

  template <typename T>
  void put(std::size_t offset, T value) noexcept {
    if (swap_) value = byteswap_value(value);
    std::memcpy(bytes_.data() + offset, &value, sizeof(T));
  }

 private:
  std::span<std::uint8_t> bytes_;
  bool swap_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for " + path.string());
  return bytes;
}

bool is_gzip(std::span<const std::uint8_t> bytes) noexcept {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::vector<std::uint8_t> read_maybe_gz(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return is_gzip(bytes) ? gzip_decompress(bytes) : bytes;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

template <typename Raw>
void decode_samples(std::span<const std::uint8_t> src, bool swap, double slope, double inter, std::span<double> dst) {
  for (std::size_t n = 0; n < dst.size(); ++n) {
    Raw raw;
    std::memcpy(&raw, src.data() + n * sizeof(Raw), sizeof(Raw));
    if (swap) raw = byteswap_value(raw);
    dst[n] = static_cast<double>(raw) * slope + inter;
  }
}

template <typename Raw>
void encode_samples(std::span<const double> src, bool swap, double slope, double inter, std::span<std::uint8_t> dst) {
  for (std::size_t n = 0; n < src.size(); ++n) {
    const double scaled = (src[n] - inter) / slope;
    Raw raw;
    if constexpr (std::is_integral_v<Raw>) {
      const double lo = static_cast<double>(std::numeric_limits<Raw>::min());
      const double hi = static_cast<double>(std::numeric_limits<Raw>::max());
      raw = static_cast<Raw>(std::clamp(std::round(scaled), lo, hi));
    } else {
      raw = static_cast<Raw>(scaled);
    }
    if (swap) raw = byteswap_value(raw);
    std::memcpy(dst.data() + n * sizeof(Raw), &raw, sizeof(Raw));
  }
}

Affine qform_affine(const NiftiHeader& h) {
  const double b = h.quatern_b;
  const double c = h.quatern_c;
  const double d = h.quatern_d;
  double a = 1.0 - (b * b + c * c + d * d);
  double qb = b;
  double qc = c;
  double qd = d;
  if (a < 1e-7) {
    // Rotation of 180 degrees; renormalize (b,c,d) and take a = 0.
    const double norm = std::sqrt(b * b + c * c + d * d);
    a = 0.0;
    if (norm > 0.0) {
      qb /= norm;
      qc /= norm;
      qd /= norm;
    }
  } else {
    a = std::sqrt(a);
  }
  const double dx = h.pixdim[1];
  const double dy = h.pixdim[2];
  const double qfac = h.pixdim[0] < 0.0F ? -1.0 : 1.0;
  const double dz = h.pixdim[3] * qfac;

  const double r11 = a * a + qb * qb - qc * qc - qd * qd;
  const double r12 = 2.0 * (qb * qc - a * qd);
  const double r13 = 2.0 * (qb * qd + a * qc);
  const double r21 = 2.0 * (qb * qc + a * qd);
  const double r22 = a * a + qc * qc - qb * qb - qd * qd;
  const double r23 = 2.0 * (qc * qd - a * qb);
  const double r31 = 2.0 * (qb * qd - a * qc);
  const double r32 = 2.0 * (qc * qd + a * qb);
  const double r33 = a * a + qd * qd - qc * qc - qb * qb;

  Affine m{};
  m[0] = {r11 * dx, r12 * dy, r13 * dz, static_cast<double>(h.qoffset_x)};
  m[1] = {r21 * dx, r22 * dy, r23 * dz, static_cast<double>(h.qoffset_y)};
  m[2] = {r31 * dx, r32 * dy, r33 * dz, static_cast<double>(h.qoffset_z)};
  m[3] = {0.0, 0.0, 0.0, 1.0};
  return m;
}

std::filesystem::path image_path_for(const std::filesystem::path& header_path) {
  std::string s = header_path.string();
  for (auto [from, to] : {std::pair{".hdr.gz", ".img.gz"}, std::pair{".hdr", ".img"}}) {
    if (ends_with(s, from)) {
      s.replace(s.size() - std::strlen(from), std::strlen(from), to);
      if (std::filesystem::exists(s)) return s;
      // Compression of the pair halves may differ.
      const std::string alt = ends_with(s, ".gz") ? s.substr(0, s.size() - 3) : s + ".gz";
      if (std::filesystem::exists(alt)) return alt;
      return s;
    }
  }
  throw Error(ErrorCode::IoError, "header/image pair requires a .hdr path: " + header_path.string());
}

}  // namespace

std::optional<std::int16_t> bitpix_for(std::int16_t datatype_code) noexcept {
  switch (static_cast<Datatype>(datatype_code)) {
    case Datatype::UInt8: return 8;
    case Datatype::Int16: return 16;
    case Datatype::Int32: return 32;
    case Datatype::Float32: return 32;
    case Datatype::Float64: return 64;
  }
  return std::nullopt;
}

Extents NiftiHeader::extents() const noexcept {
  return {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]), static_cast<std::size_t>(dim[3])};
}

Vec3 NiftiHeader::spacing() const noexcept {
  return {static_cast<double>(pixdim[1]), static_cast<double>(pixdim[2]), static_cast<double>(pixdim[3])};
}

NiftiHeader parse_header(std::span<const std::uint8_t> bytes) {
  // sizeof_hdr is enough to reject NIfTI-2 even on a short buffer.
  if (bytes.size() >= 4) {
    const Reader le(bytes, false);
    const Reader be(bytes, true);
    if (le.get<std::int32_t>(0) == kNifti2HeaderSize || be.get<std::int32_t>(0) == kNifti2HeaderSize)
      throw Error(ErrorCode::Nifti2Unsupported, "NIfTI-2 files are not supported");
  }
  if (bytes.size() < static_cast<std::size_t>(kHeaderSize))
    throw Error(ErrorCode::TruncatedHeader, "need 348 header bytes, got " + std::to_string(bytes.size()));

  NiftiHeader h;
  if (Reader(bytes, false).get<std::int32_t>(0) == kHeaderSize) {
    h.big_endian = false;
  } else if (Reader(bytes, true).get<std::int32_t>(0) == kHeaderSize) {
    h.big_endian = true;
  } else {
    throw Error(ErrorCode::BadMagic, "sizeof_hdr is not 348 in either byte order");
  }
  const Reader r(bytes, h.big_endian);
  h.sizeof_hdr = kHeaderSize;

  std::memcpy(h.magic.data(), bytes.data() + kOffMagic, 4);
  const bool single = h.magic == std::array<char, 4>{'n', '+', '1', '\0'};
  const bool pair = h.magic == std::array<char, 4>{'n', 'i', '1', '\0'};
  if (!single && !pair) throw Error(ErrorCode::BadMagic, "magic is neither \"n+1\" nor \"ni1\"");

  for (std::size_t i = 0; i < 8; ++i) h.dim[i] = r.get<std::int16_t>(kOffDim + 2 * i);
  h.datatype_code = r.get<std::int16_t>(kOffDatatype);
  h.bitpix = r.get<std::int16_t>(kOffBitpix);
  for (std::size_t i = 0; i < 8; ++i) h.pixdim[i] = r.get<float>(kOffPixdim + 4 * i);
  h.vox_offset = r.get<float>(kOffVoxOffset);
  h.scl_slope = r.get<float>(kOffSclSlope);
  h.scl_inter = r.get<float>(kOffSclInter);
  h.xyzt_units = bytes[kOffXyztUnits];
  h.qform_code = r.get<std::int16_t>(kOffQformCode);
  h.sform_code = r.get<std::int16_t>(kOffSformCode);
  h.quatern_b = r.get<float>(kOffQuatern);
  h.quatern_c = r.get<float>(kOffQuatern + 4);
  h.quatern_d = r.get<float>(kOffQuatern + 8);
  h.qoffset_x = r.get<float>(kOffQoffset);
  h.qoffset_y = r.get<float>(kOffQoffset + 4);
  h.qoffset_z = r.get<float>(kOffQoffset + 8);
  for (std::size_t i = 0; i < 4; ++i) {
    h.srow_x[i] = r.get<float>(kOffSrowX + 4 * i);
    h.srow_y[i] = r.get<float>(kOffSrowY + 4 * i);
    h.srow_z[i] = r.get<float>(kOffSrowZ + 4 * i);
  }

  const auto expected_bitpix = bitpix_for(h.datatype_code);
  if (!expected_bitpix)
    throw Error(ErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(h.datatype_code));
  if (*expected_bitpix != h.bitpix)
    throw Error(ErrorCode::InconsistentBitpix, "datatype " + std::to_string(h.datatype_code) + " requires bitpix " +
                                                   std::to_string(*expected_bitpix) + ", header says " +
                                                   std::to_string(h.bitpix));

  if (h.dim[0] != 3 && h.dim[0] != 4)
    throw Error(ErrorCode::InvalidHeader, "dim[0] must be 3 or 4, got " + std::to_string(h.dim[0]));
  for (std::size_t i = 1; i <= 3; ++i)
    if (h.dim[i] < 1) throw Error(ErrorCode::InvalidHeader, "spatial extents must be >= 1");
  if (h.dim[0] == 4 && h.dim[4] != 1)
    throw Error(ErrorCode::InvalidHeader, "multi-frame 4D volumes are not supported");
  for (std::size_t i = 1; i <= 3; ++i)
    if (!(h.pixdim[i] > 0.0F)) throw Error(ErrorCode::InvalidHeader, "pixdim[1..3] must be positive");
  if (single && h.vox_offset < static_cast<float>(kHeaderSize))
    throw Error(ErrorCode::InvalidHeader, "vox_offset lies inside the header");
  return h;
}

std::array<std::uint8_t, kHeaderSize> encode_header(const NiftiHeader& h) {
  std::array<std::uint8_t, kHeaderSize> bytes{};
  Writer w(bytes, h.big_endian);
  w.put<std::int32_t>(0, kHeaderSize);
  bytes[38] = 'r';  // "regular", legacy ANALYZE field
  for (std::size_t i = 0; i < 8; ++i) w.put<std::int16_t>(kOffDim + 2 * i, h.dim[i]);
  w.put<std::int16_t>(kOffDatatype, h.datatype_code);
  w.put<std::int16_t>(kOffBitpix, h.bitpix);
  for (std::size_t i = 0; i < 8; ++i) w.put<float>(kOffPixdim + 4 * i, h.pixdim[i]);
  w.put<float>(kOffVoxOffset, h.vox_offset);
  w.put<float>(kOffSclSlope, h.scl_slope);
  w.put<float>(kOffSclInter, h.scl_inter);
  bytes[kOffXyztUnits] = h.xyzt_units;
  w.put<std::int16_t>(kOffQformCode, h.qform_code);
  w.put<std::int16_t>(kOffSformCode, h.sform_code);
  w.put<float>(kOffQuatern, h.quatern_b);
  w.put<float>(kOffQuatern + 4, h.quatern_c);
  w.put<float>(kOffQuatern + 8, h.quatern_d);
  w.put<float>(kOffQoffset, h.qoffset_x);
  w.put<float>(kOffQoffset + 4, h.qoffset_y);
  w.put<float>(kOffQoffset + 8, h.qoffset_z);
  for (std::size_t i = 0; i < 4; ++i) {
    w.put<float>(kOffSrowX + 4 * i, h.srow_x[i]);
    w.put<float>(kOffSrowY + 4 * i, h.srow_y[i]);
    w.put<float>(kOffSrowZ + 4 * i, h.srow_z[i]);
  }
  std::memcpy(bytes.data() + kOffMagic, h.magic.data(), 4);
  return bytes;
}

Affine header_affine(const NiftiHeader& h) {
  if (h.sform_code > 0) {
    Affine m{};
    for (std::size_t c = 0; c < 4; ++c) {
      m[0][c] = h.srow_x[c];
      m[1][c] = h.srow_y[c];
      m[2][c] = h.srow_z[c];
    }
    m[3] = {0.0, 0.0, 0.0, 1.0};
    return m;
  }
  if (h.qform_code > 0) return qform_affine(h);
  return diagonal_affine(h.spacing());
}

NiftiHeader make_header(const Geometry& geometry, Datatype datatype) {
  NiftiHeader h;
  const auto& e = geometry.extents;
  constexpr auto kMaxDim = static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max());
  if (e.nx > kMaxDim || e.ny > kMaxDim || e.nz > kMaxDim)
    throw Error(ErrorCode::ExtentMismatch, "extent exceeds NIfTI-1 int16 limit");
  h.dim = {3, static_cast<std::int16_t>(e.nx), static_cast<std::int16_t>(e.ny), static_cast<std::int16_t>(e.nz), 1, 1,
           1, 1};
  h.datatype_code = static_cast<std::int16_t>(datatype);
  h.bitpix = *bitpix_for(h.datatype_code);
  h.pixdim = {1.0F,
              static_cast<float>(geometry.spacing[0]),
              static_cast<float>(geometry.spacing[1]),
              static_cast<float>(geometry.spacing[2]),
              1.0F,
              0.0F,
              0.0F,
              0.0F};
  h.qform_code = 0;
  h.sform_code = 1;
  for (std::size_t c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(geometry.affine[0][c]);
    h.srow_y[c] = static_cast<float>(geometry.affine[1][c]);
    h.srow_z[c] = static_cast<float>(geometry.affine[2][c]);
  }
  return h;
}

LoadedVolume read_volume(const std::filesystem::path& path, Modality modality) {
  const auto bytes = read_maybe_gz(path);
  NiftiHeader header = parse_header(bytes);

  std::vector<std::uint8_t> pair_data;
  std::span<const std::uint8_t> payload;
  if (header.single_file()) {
    const auto offset = static_cast<std::size_t>(header.vox_offset);
    if (offset > bytes.size()) throw Error(ErrorCode::IoError, "vox_offset beyond end of file " + path.string());
    payload = std::span<const std::uint8_t>(bytes).subspan(offset);
  } else {
    pair_data = read_maybe_gz(image_path_for(path));
    payload = pair_data;
  }

  const Extents extents = header.extents();
  const std::size_t count = extents.count();
  const std::size_t width = static_cast<std::size_t>(header.bitpix) / 8;
  if (payload.size() < count * width)
    throw Error(ErrorCode::IoError, "image data truncated in " + path.string() + ": need " +
                                        std::to_string(count * width) + " bytes, have " +
                                        std::to_string(payload.size()));

  double slope = header.scl_slope;
  double inter = header.scl_inter;
  if (slope == 0.0 || !std::isfinite(slope)) slope = 1.0;
  if (!std::isfinite(inter)) inter = 0.0;

  std::vector<double> values(count);
  const bool swap = header.big_endian != host_is_big;
  switch (header.datatype()) {
    case Datatype::UInt8: decode_samples<std::uint8_t>(payload, swap, slope, inter, values); break;
    case Datatype::Int16: decode_samples<std::int16_t>(payload, swap, slope, inter, values); break;
    case Datatype::Int32: decode_samples<std::int32_t>(payload, swap, slope, inter, values); break;
    case Datatype::Float32: decode_samples<float>(payload, swap, slope, inter, values); break;
    case Datatype::Float64: decode_samples<double>(payload, swap, slope, inter, values); break;
  }
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteData, "NaN or Inf voxel in " + path.string());

  Geometry geometry(extents, header.spacing(), header_affine(header));
  return {Volume3D(std::move(geometry), std::move(values), modality), header};
}

Mask3D read_mask(const std::filesystem::path& path) {
  const auto loaded = read_volume(path);
  Mask3D mask(loaded.volume.geometry());
  for (std::size_t n = 0; n < mask.size(); ++n) mask[n] = loaded.volume[n] != 0.0 ? 1 : 0;
  return mask;
}

void write_volume(const Grid3<double>& vol, const NiftiHeader& header_template, const std::filesystem::path& path) {
  if (vol.extents() != header_template.extents())
    throw Error(ErrorCode::ExtentMismatch, "volume extents do not match the header template");
  const auto bitpix = bitpix_for(header_template.datatype_code);
  if (!bitpix) throw Error(ErrorCode::UnsupportedDatatype, "template datatype " +
                                                               std::to_string(header_template.datatype_code));

  NiftiHeader h = header_template;
  h.sizeof_hdr = kHeaderSize;
  h.dim[0] = 3;
  for (std::size_t i = 4; i < 8; ++i) h.dim[i] = 1;
  h.bitpix = *bitpix;
  for (std::size_t i = 0; i < 3; ++i) h.pixdim[i + 1] = static_cast<float>(vol.spacing()[i]);
  h.vox_offset = static_cast<float>(kDefaultVoxOffset);
  h.magic = {'n', '+', '1', '\0'};
  for (std::size_t c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(vol.affine()[0][c]);
    h.srow_y[c] = static_cast<float>(vol.affine()[1][c]);
    h.srow_z[c] = static_cast<float>(vol.affine()[2][c]);
  }

  double slope = h.scl_slope;
  double inter = h.scl_inter;
  if (slope == 0.0 || !std::isfinite(slope)) slope = 1.0;
  if (!std::isfinite(inter)) inter = 0.0;

  const std::size_t width = static_cast<std::size_t>(h.bitpix) / 8;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(kDefaultVoxOffset) + vol.size() * width, 0);
  const auto encoded = encode_header(h);
  std::copy(encoded.begin(), encoded.end(), out.begin());
  auto payload = std::span<std::uint8_t>(out).subspan(static_cast<std::size_t>(kDefaultVoxOffset));
  const bool swap = h.big_endian != host_is_big;
  switch (h.datatype()) {
    case Datatype::UInt8: encode_samples<std::uint8_t>(vol.data(), swap, slope, inter, payload); break;
    case Datatype::Int16: encode_samples<std::int16_t>(vol.data(), swap, slope, inter, payload); break;
    case Datatype::Int32: encode_samples<std::int32_t>(vol.data(), swap, slope, inter, payload); break;
    case Datatype::Float32: encode_samples<float>(vol.data(), swap, slope, inter, payload); break;
    case Datatype::Float64: encode_samples<double>(vol.data(), swap, slope, inter, payload); break;
  }

  if (ends_with(path.string(), ".gz")) {
    write_file(path, gzip_compress(out));
  } else {
    write_file(path, out);
  }
}

void write_mask(const Mask3D& mask, const NiftiHeader& header_template, const std::filesystem::path& path) {
  NiftiHeader h = header_template;
  h.datatype_code = static_cast<std::int16_t>(Datatype::UInt8);
  h.bitpix = 8;
  h.scl_slope = 1.0F;
  h.scl_inter = 0.0F;
  Grid3<double> values(mask.geometry());
  for (std::size_t n = 0; n < mask.size(); ++n) values[n] = mask[n] != 0 ? 1.0 : 0.0;
  write_volume(values, h, path);
}

void write_mask(const Mask3D& mask, const std::filesystem::path& path) {
  write_mask(mask, make_header(mask.geometry(), Datatype::UInt8), path);
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> raw) {
  z_stream zs{};
  // windowBits 15 + 16 selects the gzip wrapper; zlib writes mtime 0, so output is reproducible.
  // Level 1: image noise barely compresses at higher levels, which cost several times more.
  if (deflateInit2(&zs, 1, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(ErrorCode::IoError, "deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(raw.size())) + 32);
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::IoError, "gzip compression failed");
  out.resize(produced);
  return out;
}

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> compressed) {
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  std::size_t consumed = 0;
  // Loop over concatenated gzip members.
  while (consumed < compressed.size()) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(ErrorCode::IoError, "inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(compressed.data() + consumed);
    zs.avail_in = static_cast<uInt>(compressed.size() - consumed);
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
      zs.next_out = chunk.data();
      zs.avail_out = static_cast<uInt>(chunk.size());
      rc = inflate(&zs, Z_NO_FLUSH);
      if (rc != Z_OK && rc != Z_STREAM_END) {
        inflateEnd(&zs);
        throw Error(ErrorCode::IoError, "corrupt gzip stream");
      }
      out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
      if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
        inflateEnd(&zs);
        throw Error(ErrorCode::IoError, "truncated gzip stream");
      }
    }
    consumed += zs.total_in;
    inflateEnd(&zs);
    // Trailing zero padding after the last member is tolerated.
    if (std::all_of(compressed.begin() + static_cast<std::ptrdiff_t>(consumed), compressed.end(),
                    [](std::uint8_t b) { return b == 0; }))
      break;
  }
  return out;
}

}  // namespace volprep::nifti
