#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedtier/nn.hpp"
#include "fedtier/tensor.hpp"

namespace fedtier {

/// Model-exchange byte format, every integer and float little-endian:
///
///   u16 format_version (= kCodecVersion)
///   u32 tensor_count
///   per tensor:
///     u16 name_length, name bytes (UTF-8)
///     u8  rank, rank x u32 dims
///     product(dims) x f64 (IEEE-754 binary64)
///
/// The same bytes are used on the (simulated) wire and for snapshots on disk.
inline constexpr std::uint16_t kCodecVersion = 1;

using Bytes = std::vector<std::uint8_t>;

Bytes encode_params(const ModelParams& params);

/// Throws CodecError: kVersionMismatch, kTruncated, kMalformed (trailing bytes,
/// duplicate names, zero dims) or kShapeMismatch against `arch`.
ModelParams decode_params(std::span<const std::uint8_t> bytes, const SimpleCnnArch& arch);

/// Decodes without checking against an architecture.
ModelParams decode_params(std::span<const std::uint8_t> bytes);

/// Byte length of encode_params() for any parameter set of this layout.
std::size_t encoded_size(const SimpleCnnArch& arch);

void write_params_file(const std::filesystem::path& path, const ModelParams& params);
ModelParams read_params_file(const std::filesystem::path& path, const SimpleCnnArch& arch);

}  // namespace fedtier
