#include "psfdecon/volume_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <json.hpp>

namespace psfdecon {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

uint32_t to_little(uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  return v;
}

}  // namespace

fs::path volume_stem(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".f32raw" || ext == ".json") return fs::path(path).replace_extension();
  return path;
}

Volume read_volume(const fs::path& path, const ReadOptions& opts) {
  const fs::path stem = volume_stem(path);
  const fs::path meta_path = fs::path(stem).concat(".json");
  const fs::path raw_path = fs::path(stem).concat(".f32raw");

  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("missing sidecar " + meta_path.string());
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw IoError("malformed sidecar " + meta_path.string() + ": " + e.what());
  }

  Dims dims;
  Eigen::Vector3d voxel;
  try {
    const auto d = meta.at("dims").get<std::vector<long long>>();
    const auto r = meta.at("voxel_size_um").get<std::vector<double>>();
    if (d.size() != 3 || r.size() != 3) throw IoError("dims and voxel_size_um need 3 entries");
    dims = {d[0], d[1], d[2]};
    voxel = {r[0], r[1], r[2]};
    if (meta.contains("order") && meta.at("order").get<std::string>() != "x-fastest")
      throw IoError("unsupported order '" + meta.at("order").get<std::string>() + "'");
  } catch (const json::exception& e) {
    throw IoError("bad sidecar " + meta_path.string() + ": " + e.what());
  }
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
    throw IoError("sidecar dims must be positive in " + meta_path.string());

  std::ifstream raw(raw_path, std::ios::binary);
  if (!raw) throw IoError("missing data file " + raw_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0)
    throw IoError(raw_path.string() + ": size is not a multiple of 4 bytes");
  const auto count = static_cast<Index>(bytes.size() / 4);
  if (count != dims.count())
    throw IoError(raw_path.string() + ": holds " + std::to_string(count) +
                  " values but sidecar dims " + to_string(dims) + " need " +
                  std::to_string(dims.count()));

  Eigen::ArrayXd values(count);
  for (Index n = 0; n < count; ++n) {
    uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * n, 4);
    const float f = std::bit_cast<float>(to_little(bits));
    if (!opts.allow_non_finite && !std::isfinite(f))
      throw IoError(raw_path.string() + ": non-finite value at flat index " + std::to_string(n));
    values[n] = static_cast<double>(f);
  }
  try {
    return Volume(dims, voxel, std::move(values));
  } catch (const std::invalid_argument& e) {
    throw IoError(meta_path.string() + ": " + e.what());
  }
}

void write_volume(const Volume& vol, const fs::path& path) {
  const fs::path stem = volume_stem(path);
  if (stem.has_parent_path() && !fs::exists(stem.parent_path()))
    throw IoError("output directory does not exist: " + stem.parent_path().string());

  const fs::path raw_path = fs::path(stem).concat(".f32raw");
  std::ofstream raw(raw_path, std::ios::binary | std::ios::trunc);
  if (!raw) throw IoError("cannot write " + raw_path.string());
  std::vector<char> bytes(static_cast<size_t>(vol.size()) * 4);
  for (Index n = 0; n < vol.size(); ++n) {
    const uint32_t bits = to_little(std::bit_cast<uint32_t>(static_cast<float>(vol.values()[n])));
    std::memcpy(bytes.data() + 4 * n, &bits, 4);
  }
  raw.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!raw) throw IoError("short write to " + raw_path.string());

  const fs::path meta_path = fs::path(stem).concat(".json");
  json meta;
  meta["dims"] = {vol.dims().nx, vol.dims().ny, vol.dims().nz};
  meta["voxel_size_um"] = {vol.voxel_um()[0], vol.voxel_um()[1], vol.voxel_um()[2]};
  meta["order"] = "x-fastest";
  std::ofstream meta_out(meta_path, std::ios::trunc);
  if (!meta_out) throw IoError("cannot write " + meta_path.string());
  meta_out << meta.dump(2) << '\n';
}

}  // namespace psfdecon
