#include "vgflow/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "vgflow/errors.hpp"

namespace vgflow {

using json = nlohmann::json;

VoxelGrid::VoxelGrid(Dims d, Spacing s, double fill)
    : dims(d), spacing(s), data(voxel_count(d), fill) {}

VoxelGrid::VoxelGrid(Dims d, Spacing s, std::vector<double> values)
    : dims(d), spacing(s), data(std::move(values)) {
  validate(*this);
}

VesselMask::VesselMask(Dims d, Spacing s)
    : dims(d), spacing(s), mask(voxel_count(d), 0), cluster_id(voxel_count(d), 0) {}

std::size_t VesselMask::foreground_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

void validate_geometry(const Dims& dims, const Spacing& spacing) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] == 0) throw InvalidParameter("grid dimensions must be positive");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw InvalidParameter("voxel spacing must be positive and finite");
  }
}

}  // namespace

void validate(const VoxelGrid& grid) {
  validate_geometry(grid.dims, grid.spacing);
  if (grid.data.size() != voxel_count(grid.dims))
    throw InvalidParameter("voxel data length does not match dims");
}

void validate(const VesselMask& m) {
  validate_geometry(m.dims, m.spacing);
  if (m.mask.size() != voxel_count(m.dims) || m.cluster_id.size() != m.mask.size())
    throw InvalidParameter("mask length does not match dims");
}

const std::array<Index3, 26>& neighbors26() {
  static const std::array<Index3, 26> offsets = [] {
    std::array<Index3, 26> out{};
    std::size_t n = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx != 0 || dy != 0 || dz != 0) out[n++] = {dx, dy, dz};
    return out;
  }();
  return offsets;
}

// --- little-endian helpers --------------------------------------------------

namespace {

template <typename T>
T load_le(const unsigned char* p) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

template <typename T>
void store_le(unsigned char* p, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  std::memcpy(p, buf, sizeof(T));
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

struct DtypeInfo {
  std::string name;
  std::size_t bytes;
};

DtypeInfo dtype_info(const std::string& name) {
  if (name == "uint8") return {name, 1};
  if (name == "int16") return {name, 2};
  if (name == "int32") return {name, 4};
  if (name == "float32") return {name, 4};
  if (name == "float64") return {name, 8};
  throw FormatError("unsupported dtype '" + name + "'");
}

double decode(const std::string& dtype, const unsigned char* p) {
  if (dtype == "uint8") return static_cast<double>(*p);
  if (dtype == "int16") return static_cast<double>(load_le<std::int16_t>(p));
  if (dtype == "int32") return static_cast<double>(load_le<std::int32_t>(p));
  if (dtype == "float32") return static_cast<double>(load_le<float>(p));
  return load_le<double>(p);
}

void encode(const std::string& dtype, unsigned char* p, double v) {
  if (dtype == "uint8") *p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  else if (dtype == "int16") store_le(p, static_cast<std::int16_t>(std::lround(v)));
  else if (dtype == "int32") store_le(p, static_cast<std::int32_t>(std::lround(v)));
  else if (dtype == "float32") store_le(p, static_cast<float>(v));
  else store_le(p, v);
}

constexpr std::size_t kNiftiHeaderSize = 348;

}  // namespace

// --- NIfTI-1 ----------------------------------------------------------------

VoxelGrid read_nifti(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
    throw FormatError("compressed NIfTI is not supported: " + path.string());
  if (bytes.size() < kNiftiHeaderSize) throw FormatError("truncated NIfTI header: " + path.string());
  const unsigned char* h = bytes.data();

  const auto sizeof_hdr = load_le<std::int32_t>(h);
  if (sizeof_hdr != static_cast<std::int32_t>(kNiftiHeaderSize)) {
    if (__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == kNiftiHeaderSize)
      throw FormatError("big-endian NIfTI is not supported: " + path.string());
    throw FormatError("bad NIfTI sizeof_hdr: " + std::to_string(sizeof_hdr));
  }
  if (std::memcmp(h + 344, "n+1\0", 4) != 0)
    throw FormatError("bad NIfTI magic (expected single-file \"n+1\"): " + path.string());

  const auto ndim = load_le<std::int16_t>(h + 40);
  if (ndim < 1 || ndim > 7) throw FormatError("bad NIfTI dim[0]: " + std::to_string(ndim));
  Dims dims{1, 1, 1};
  for (int a = 0; a < 3; ++a) {
    if (a < ndim) {
      const auto d = load_le<std::int16_t>(h + 42 + 2 * a);
      if (d < 1) throw FormatError("bad NIfTI dimension");
      dims[a] = static_cast<std::size_t>(d);
    }
  }
  for (int a = 3; a < ndim; ++a)
    if (load_le<std::int16_t>(h + 42 + 2 * a) > 1)
      throw FormatError("only 3D NIfTI volumes are supported");

  const auto datatype = load_le<std::int16_t>(h + 70);
  std::string dtype;
  switch (datatype) {
    case 2: dtype = "uint8"; break;
    case 4: dtype = "int16"; break;
    case 16: dtype = "float32"; break;
    default: throw FormatError("unsupported datatype " + std::to_string(datatype));
  }

  Spacing spacing{1.0, 1.0, 1.0};
  for (int a = 0; a < 3; ++a) {
    const double s = std::fabs(static_cast<double>(load_le<float>(h + 80 + 4 * a)));
    spacing[a] = s > 0.0 ? s : 1.0;
  }
  const double vox_offset = static_cast<double>(load_le<float>(h + 108));
  const double slope = static_cast<double>(load_le<float>(h + 112));
  const double inter = static_cast<double>(load_le<float>(h + 116));

  const auto offset = static_cast<std::size_t>(std::max(vox_offset, 352.0));
  const std::size_t elem = dtype_info(dtype).bytes;
  const std::size_t n = voxel_count(dims);
  if (bytes.size() < offset + n * elem) throw FormatError("truncated NIfTI voxel data");

  VoxelGrid grid(dims, spacing);
  const bool scale = slope != 0.0 && std::isfinite(slope);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = decode(dtype, bytes.data() + offset + i * elem);
    grid.data[i] = scale ? v * slope + inter : v;
  }
  return grid;
}

void write_nifti_float32(const std::filesystem::path& path, const VoxelGrid& grid) {
  validate(grid);
  const std::size_t n = grid.size();
  std::vector<unsigned char> bytes(352 + 4 * n, 0);
  unsigned char* h = bytes.data();
  store_le<std::int32_t>(h, 348);
  store_le<std::int16_t>(h + 40, 3);
  for (int a = 0; a < 3; ++a) store_le<std::int16_t>(h + 42 + 2 * a, static_cast<std::int16_t>(grid.dims[a]));
  for (int a = 3; a < 7; ++a) store_le<std::int16_t>(h + 42 + 2 * a, 1);
  store_le<std::int16_t>(h + 70, 16);
  store_le<std::int16_t>(h + 72, 32);
  store_le<float>(h + 76, 1.0f);
  for (int a = 0; a < 3; ++a) store_le<float>(h + 80 + 4 * a, static_cast<float>(grid.spacing[a]));
  store_le<float>(h + 108, 352.0f);
  store_le<float>(h + 112, 1.0f);
  std::memcpy(h + 344, "n+1\0", 4);
  for (std::size_t i = 0; i < n; ++i) store_le<float>(h + 352 + 4 * i, static_cast<float>(grid.data[i]));
  write_bytes(path, bytes);
}

// --- raw + sidecar ----------------------------------------------------------

namespace {

struct RawHeader {
  Dims dims{};
  Spacing spacing{};
  std::string dtype;
  std::filesystem::path data_path;
  json sidecar;
};

RawHeader read_sidecar(const std::filesystem::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) throw FormatError("cannot open " + sidecar.string());
  RawHeader h;
  try {
    in >> h.sidecar;
    const auto& j = h.sidecar;
    for (int a = 0; a < 3; ++a) {
      h.dims[a] = j.at("dims").at(a).get<std::size_t>();
      h.spacing[a] = j.at("spacing").at(a).get<double>();
    }
    h.dtype = j.at("dtype").get<std::string>();
    if (j.contains("data"))
      h.data_path = sidecar.parent_path() / j["data"].get<std::string>();
    else
      h.data_path = std::filesystem::path(sidecar).replace_extension(".raw");
  } catch (const json::exception& e) {
    throw FormatError("malformed raw sidecar " + sidecar.string() + ": " + e.what());
  }
  validate_geometry(h.dims, h.spacing);
  return h;
}

std::vector<double> read_raw_values(const RawHeader& h) {
  const std::size_t elem = dtype_info(h.dtype).bytes;
  const auto bytes = read_bytes(h.data_path);
  const std::size_t n = voxel_count(h.dims);
  if (bytes.size() != n * elem)
    throw FormatError("raw voxel file " + h.data_path.string() + " has " +
                      std::to_string(bytes.size()) + " bytes, expected " + std::to_string(n * elem));
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = decode(h.dtype, bytes.data() + i * elem);
  return values;
}

void write_raw_values(const std::filesystem::path& sidecar, json header,
                      const std::vector<double>& values, const std::string& dtype) {
  const std::size_t elem = dtype_info(dtype).bytes;
  const auto data_path = std::filesystem::path(sidecar).replace_extension(".raw");
  header["dtype"] = dtype;
  header["data"] = data_path.filename().string();
  std::vector<unsigned char> bytes(values.size() * elem);
  for (std::size_t i = 0; i < values.size(); ++i) encode(dtype, bytes.data() + i * elem, values[i]);
  write_bytes(data_path, bytes);
  std::ofstream out(sidecar);
  if (!out) throw FormatError("cannot write " + sidecar.string());
  out << header.dump(2) << '\n';
}

}  // namespace

VoxelGrid read_raw(const std::filesystem::path& sidecar) {
  const auto h = read_sidecar(sidecar);
  return VoxelGrid(h.dims, h.spacing, read_raw_values(h));
}

void write_raw(const std::filesystem::path& sidecar, const VoxelGrid& grid, const char* dtype) {
  validate(grid);
  dtype_info(dtype);
  json header{{"dims", grid.dims}, {"spacing", grid.spacing}};
  write_raw_values(sidecar, header, grid.data, dtype);
}

VoxelGrid read_volume(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".nii") return read_nifti(path);
  if (ext == ".gz") throw FormatError("compressed NIfTI is not supported: " + path.string());
  if (ext == ".json") return read_raw(path);
  throw FormatError("unrecognized volume extension '" + ext + "' (expected .nii or .json)");
}

void write_mask(const std::filesystem::path& sidecar, const VesselMask& m, const json& provenance) {
  validate(m);
  std::vector<double> labels(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    labels[i] = m.mask[i] ? static_cast<double>(std::max(m.cluster_id[i], 1)) : 0.0;
  json header{{"dims", m.dims}, {"spacing", m.spacing}, {"kind", "vessel_mask"}};
  if (!provenance.is_null()) header["provenance"] = provenance;
  write_raw_values(sidecar, header, labels, "int32");
}

VesselMask read_mask(const std::filesystem::path& sidecar) {
  const auto h = read_sidecar(sidecar);
  const auto values = read_raw_values(h);
  VesselMask m(h.dims, h.spacing);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 0.0) {
      m.mask[i] = 1;
      m.cluster_id[i] = static_cast<std::int32_t>(values[i]);
    }
  }
  return m;
}

}  // namespace vgflow
