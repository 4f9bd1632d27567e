#pragma once

#include <filesystem>

#include "psfdecon/volume.hpp"

namespace psfdecon {

struct ReadOptions {
  /// Accept NaN/Inf samples instead of rejecting the file.
  bool allow_non_finite = false;
};

/// Volumes live in two files sharing a stem: `<stem>.f32raw` holds
/// little-endian float32 samples in x-fastest order and `<stem>.json` holds
/// {"dims":[nx,ny,nz],"voxel_size_um":[rx,ry,rz],"order":"x-fastest"}.
/// `path` may name either file or the bare stem.
Volume read_volume(const std::filesystem::path& path, const ReadOptions& opts = {});
void write_volume(const Volume& vol, const std::filesystem::path& path);

/// Stem with any .f32raw / .json extension stripped.
std::filesystem::path volume_stem(const std::filesystem::path& path);

}  // namespace psfdecon
