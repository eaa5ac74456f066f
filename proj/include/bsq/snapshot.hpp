#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bsq/fields.hpp"
#include "bsq/scheme.hpp"

namespace bsq {

/// Field snapshot, all integers and floats little-endian:
///
///   offset  size  content
///        0     4  magic "BSQF"
///        4     4  uint32 format version (1)
///        8     4  uint32 basis tag: 0 velocity, 1 sine scalar, 2 periodic scalar
///       12     4  uint32 component count (2 or 1)
///       16     8  float64 L
///       24     4  int32 n1
///       28     4  int32 n2
///       32     -  components * n1 * n2 complex coefficients, each (re, im) float64,
///                 component-major then storage order (i1 major, i2 minor)
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_snapshot(const std::filesystem::path& path, const VectorField& u);
void write_snapshot(const std::filesystem::path& path, const ScalarField& theta);

/// Throws ConfigError on a bad header, truncated data or an unknown version.
/// `grid` is reused when it matches the header, otherwise a new grid is created.
VectorField read_vector_snapshot(const std::filesystem::path& path, GridPtr grid = nullptr);
ScalarField read_scalar_snapshot(const std::filesystem::path& path, GridPtr grid = nullptr);

/// Checkpoint of a scheme state: <stem>_u.bsq, <stem>_theta.bsq and a JSON
/// sidecar <stem>.json holding step, n_steps, h, seed, params and `extra`
/// (a JSON object serialized as text).
void write_checkpoint(const std::filesystem::path& dir, const std::string& stem, const SchemeState& state,
                      const ModelParams& params, std::uint64_t seed, const std::string& extra_json = "{}");
SchemeState read_checkpoint(const std::filesystem::path& dir, const std::string& stem, GridPtr grid = nullptr);

}  // namespace bsq
