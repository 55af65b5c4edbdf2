#include "atrophy/imgvol/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "atrophy/error.hpp"

namespace atrophy {
namespace {

static_assert(std::endian::native == std::endian::little,
              "the NIfTI reader assumes a little-endian host");

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

bool is_gz(const std::filesystem::path& p) {
  const std::string s = p.string();
  return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

std::vector<char> read_all(const std::filesystem::path& path) {
  std::vector<char> buf;
  if (is_gz(path)) {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (f == nullptr) throw Error("cannot open " + path.string());
    char chunk[1 << 16];
    int n = 0;
    while ((n = gzread(f, chunk, sizeof(chunk))) > 0) buf.insert(buf.end(), chunk, chunk + n);
    int err = 0;
    const char* msg = gzerror(f, &err);
    gzclose(f);
    if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) {
      throw Error("gzip error reading " + path.string() + ": " + msg);
    }
    return buf;
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  buf.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  return buf;
}

template <typename T>
T get(const std::vector<char>& b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  return v;
}

template <typename T>
void put(std::vector<char>& b, std::size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof(T));
}

Mat4 qform_matrix(const std::vector<char>& h, const Vec3& pixdim) {
  const double b = get<float>(h, 256), c = get<float>(h, 260), d = get<float>(h, 264);
  const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
  Mat3 r;
  r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
  double qfac = get<float>(h, 76);
  qfac = qfac < 0 ? -1.0 : 1.0;
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r * Vec3(pixdim[0], pixdim[1], pixdim[2] * qfac).asDiagonal();
  m(0, 3) = get<float>(h, 268);
  m(1, 3) = get<float>(h, 272);
  m(2, 3) = get<float>(h, 276);
  return m;
}

}  // namespace

NiftiImage read_nifti(const std::filesystem::path& path) {
  const std::vector<char> buf = read_all(path);
  const std::string name = path.string();
  if (buf.size() < kDataOffset) throw Error(name + ": file too short for a NIfTI-1 header");
  const auto sizeof_hdr = get<std::int32_t>(buf, 0);
  if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
    if (static_cast<std::int32_t>(__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr))) == static_cast<std::int32_t>(kHeaderSize)) {
      throw Error(name + ": big-endian NIfTI files are not supported");
    }
    throw Error(name + ": not a NIfTI-1 file (sizeof_hdr != 348)");
  }
  if (std::memcmp(buf.data() + 344, "n+1\0", 4) != 0) {
    throw Error(name + ": only single-file NIfTI-1 (magic n+1) is supported");
  }
  if (buf[348] != 0) throw Error(name + ": NIfTI extensions are not supported");

  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = get<std::int16_t>(buf, 40 + 2 * i);
  if (dim[0] < 3 || dim[0] > 7) throw Error(name + ": expected a 3-D volume");
  for (int i = 4; i <= dim[0]; ++i) {
    if (dim[i] > 1) throw Error(name + ": multi-frame volumes are not supported");
  }
  const Index3 dims{dim[1], dim[2], dim[3]};
  for (auto d : dims) {
    if (d < 1) throw Error(name + ": invalid dimension");
  }

  const auto datatype = get<std::int16_t>(buf, 70);
  std::size_t bytes = 0;
  switch (datatype) {
    case 2: bytes = 1; break;
    case 4: bytes = 2; break;
    case 16: bytes = 4; break;
    default:
      throw Error(name + ": unsupported datatype " + std::to_string(datatype) +
                  " (accepted: uint8, int16, float32)");
  }

  Vec3 pixdim(get<float>(buf, 80), get<float>(buf, 84), get<float>(buf, 88));
  for (int i = 0; i < 3; ++i) {
    if (!(std::isfinite(pixdim[i]) && pixdim[i] > 0)) pixdim[i] = 1.0;
  }

  Mat4 m = Mat4::Identity();
  const auto qform_code = get<std::int16_t>(buf, 252);
  const auto sform_code = get<std::int16_t>(buf, 254);
  if (sform_code > 0) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) m(r, c) = get<float>(buf, 280 + 16 * r + 4 * c);
    }
  } else if (qform_code > 0) {
    m = qform_matrix(buf, pixdim);
  } else {
    m.diagonal().head<3>() = pixdim;
  }
  if (!(m.topLeftCorner<3, 3>().determinant() > 0.0)) {
    throw Error(name + ": voxel-to-world affine must have a positive determinant "
                "(reorientation is not supported)");
  }

  const double vox_offset = get<float>(buf, 108);
  if (!(vox_offset >= static_cast<double>(kDataOffset))) {
    throw Error(name + ": invalid vox_offset");
  }
  const auto offset = static_cast<std::size_t>(vox_offset);
  const std::size_t n = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  if (buf.size() < offset + n * bytes) throw Error(name + ": truncated voxel data");

  double slope = get<float>(buf, 112);
  double inter = get<float>(buf, 116);
  if (!std::isfinite(slope) || slope == 0.0) {
    slope = 1.0;
    inter = 0.0;
  }
  if (!std::isfinite(inter)) inter = 0.0;

  std::vector<double> data(n);
  const char* p = buf.data() + offset;
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0;
    switch (datatype) {
      case 2: v = static_cast<std::uint8_t>(p[i]); break;
      case 4: {
        std::int16_t s;
        std::memcpy(&s, p + 2 * i, 2);
        v = s;
        break;
      }
      default: {
        float f;
        std::memcpy(&f, p + 4 * i, 4);
        v = f;
        break;
      }
    }
    if (slope != 1.0 || inter != 0.0) v = v * slope + inter;
    if (!std::isfinite(v)) throw Error(name + ": non-finite voxel value at index " + std::to_string(i));
    data[i] = v;
  }

  NiftiImage img;
  img.volume = Volume(Grid(dims, Affine4(m)), std::move(data));
  img.datatype = static_cast<NiftiType>(datatype);
  return img;
}

Volume load_volume(const std::filesystem::path& path) {
  NiftiImage img = read_nifti(path);
  require_pipeline_grid(img.volume.grid());
  return std::move(img.volume);
}

void save_volume(const Volume& v, const std::filesystem::path& path, NiftiType type) {
  const Grid& g = v.grid();
  const std::size_t n = v.size();
  const std::size_t bytes = type == NiftiType::UInt8 ? 1 : type == NiftiType::Int16 ? 2 : 4;
  std::vector<char> buf(kDataOffset + n * bytes, 0);
  put<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
  put<char>(buf, 38, 'r');
  const std::int16_t dim[8] = {3, static_cast<std::int16_t>(g.nx()), static_cast<std::int16_t>(g.ny()),
                               static_cast<std::int16_t>(g.nz()), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, dim[i]);
  put<std::int16_t>(buf, 70, static_cast<std::int16_t>(type));
  put<std::int16_t>(buf, 72, static_cast<std::int16_t>(bytes * 8));
  const float pixdim[8] = {1.0f, static_cast<float>(g.spacing()[0]), static_cast<float>(g.spacing()[1]),
                           static_cast<float>(g.spacing()[2]), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<float>(buf, 76 + 4 * i, pixdim[i]);
  put<float>(buf, 108, static_cast<float>(kDataOffset));
  put<float>(buf, 112, 1.0f);
  put<float>(buf, 116, 0.0f);
  put<char>(buf, 123, 2);  // mm
  put<std::int16_t>(buf, 252, 0);
  put<std::int16_t>(buf, 254, 2);
  const Mat4& m = g.vox_to_world().matrix();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) put<float>(buf, 280 + 16 * r + 4 * c, static_cast<float>(m(r, c)));
  }
  std::memcpy(buf.data() + 344, "n+1\0", 4);

  char* p = buf.data() + kDataOffset;
  const auto d = v.data();
  for (std::size_t i = 0; i < n; ++i) {
    switch (type) {
      case NiftiType::UInt8:
        p[i] = static_cast<char>(static_cast<std::uint8_t>(std::clamp(std::lround(d[i]), 0L, 255L)));
        break;
      case NiftiType::Int16: {
        const auto s = static_cast<std::int16_t>(std::clamp(std::lround(d[i]), -32768L, 32767L));
        std::memcpy(p + 2 * i, &s, 2);
        break;
      }
      case NiftiType::Float32: {
        const auto f = static_cast<float>(d[i]);
        std::memcpy(p + 4 * i, &f, 4);
        break;
      }
    }
  }

  const std::string name = path.string();
  if (is_gz(path)) {
    gzFile f = gzopen(name.c_str(), "wb6");
    if (f == nullptr) throw Error("cannot write " + name);
    std::size_t done = 0;
    while (done < buf.size()) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(buf.size() - done, 1u << 30));
      if (gzwrite(f, buf.data() + done, chunk) != static_cast<int>(chunk)) {
        gzclose(f);
        throw Error("I/O failure writing " + name);
      }
      done += chunk;
    }
    if (gzclose(f) != Z_OK) throw Error("I/O failure closing " + name);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + name);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw Error("I/O failure writing " + name);
}

}  // namespace atrophy
