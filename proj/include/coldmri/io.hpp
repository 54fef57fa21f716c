#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "coldmri/image.hpp"
#include "coldmri/masks.hpp"
#include "coldmri/restorer.hpp"

namespace coldmri {

// All binary formats are little-endian with a 4-byte ASCII magic.  Malformed
// or truncated files raise IoError.

/// Complex image file ("CIM1"): u32 height, u32 width, then height*width
/// (real, imag) float32 pairs in row-major order.
void write_cim(const std::filesystem::path& path, const ComplexImage& img);
ComplexImage read_cim(const std::filesystem::path& path);

/// Column mask file ("KMS1"): u32 width, then width 0/1 bytes.  On load the
/// accel factor is derived as width / num_selected and the centre fraction
/// from the largest fully selected centre block.
void write_mask(const std::filesystem::path& path, const ColumnMask& mask);
ColumnMask read_mask(const std::filesystem::path& path);

/// Mask family file ("KFM1"): u32 width, u32 T, u8 schedule kind (0 linear,
/// 1 log), f64 sr_min, u64 seed, then (T+1)*width 0/1 bytes, one mask per
/// step.  Loading revalidates nesting and the per-step column counts.
void write_family(const std::filesystem::path& path, const MaskFamily& family);
MaskFamily read_family(const std::filesystem::path& path);

/// Checkpoint file ("CKP1"): u32 version, u32 channels, u32 depth, u64
/// parameter count, float32 parameters, then u64 entry count and u64-length-
/// prefixed "key=value" metadata strings (which carry total_steps).
void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// 8-bit binary PGM of the magnitude image, normalised to the peak.
void write_pgm(const std::filesystem::path& path, const ComplexImage& img);

/// Shortest round-trippable decimal form (printf %.17g).
std::string format_double(double v);

/// One CSV line per row; every float is rendered with format_double.
void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::string>& rows);

/// key=value pairs, one per line; '#' starts a comment.  Used for run
/// manifests (write_manifest adds provenance comments on top).
std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& entries,
                    const std::vector<std::string>& comments = {});

/// A dataset directory holds numbered .cim slices plus manifest.txt listing
/// one filename per line.
struct Dataset {
  std::vector<std::string> ids;  // filename stems, parallel to images
  std::vector<ComplexImage> images;
};

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir,
                  const std::vector<ComplexImage>& images);

}  // namespace coldmri
