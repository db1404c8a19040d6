#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dsb/harness.hpp"
#include "dsb/mixture.hpp"
#include "dsb/sampler.hpp"

namespace dsb {

/// Sample file layout, all little-endian:
///   offset  0  magic "DSB1"
///   offset  4  u32 version (1)
///   offset  8  u64 n
///   offset 16  u64 d
///   offset 24  u32 scalar width in bytes (4 = f32, 8 = f64)
///   offset 28  u64 metadata length m
///   offset 36  m bytes of UTF-8 JSON metadata
///   then       n * d scalars, row-major
inline constexpr std::uint32_t kSampleFileVersion = 1;
inline constexpr std::size_t kSampleHeaderBytes = 36;

enum class ScalarWidth : std::uint32_t { kF32 = 4, kF64 = 8 };

/// Throws BAD_HEADER for n = 0 or d = 0 and NON_FINITE_DATA for non-finite entries.
std::vector<std::byte> encode_samples(const SampleBatch& batch, ScalarWidth width = ScalarWidth::kF64);
/// Throws BAD_MAGIC, VERSION_MISMATCH, BAD_HEADER, TRUNCATED_PAYLOAD,
/// TRAILING_DATA, BAD_METADATA or NON_FINITE_DATA.
SampleBatch decode_samples(std::span<const std::byte> bytes);

/// Throws IO_FAILURE when the file cannot be written, plus the encode errors.
void write_samples(const SampleBatch& batch, const std::filesystem::path& path,
                   ScalarWidth width = ScalarWidth::kF64);
/// Throws IO_FAILURE when the file cannot be read, plus the decode errors.
SampleBatch read_samples(const std::filesystem::path& path);

std::string sample_meta_to_json(const SampleMeta& meta);

/// {"weights": [...], "means": [[...]], "covariances": [{"type": "diagonal"|"full", "data": [...]}]}.
/// Full data may be flat row-major or nested rows. Throws BAD_CONFIG on shape
/// errors and INVALID_MIXTURE on invalid parameters.
GaussianMixture parse_mixture_json(const std::string& text);
GaussianMixture load_mixture(const std::filesystem::path& path);
std::string mixture_to_json(const GaussianMixture& mixture);

/// JSON sweep configuration; unknown keys are rejected with BAD_CONFIG.
/// Relative mixture_file and reference_file paths are resolved against base_dir.
SweepConfig parse_sweep_config(const std::string& text, const std::filesystem::path& base_dir = {});
/// "vp-linear" or {"kind": "generic", "f": {"breaks": [...], "coeffs": [[...]]}, "g": {...},
/// "quadrature_step": q}; coefficients ascend in powers of t.
ScheduleSpec parse_schedule_spec(const std::string& text);
SweepConfig load_sweep_config(const std::filesystem::path& path);
std::string sweep_config_to_json(const SweepConfig& cfg);

/// swept_value,w2,eps,stable,n,seed with 17 significant digits.
void write_report_csv(const ConvergenceReport& report, std::ostream& out);
std::string report_csv(const ConvergenceReport& report);
/// Fit, window selection, floor, per-row wall times and the config echo.
std::string report_json(const ConvergenceReport& report);
/// Writes <prefix>.csv and <prefix>.json; throws IO_FAILURE.
void write_report(const ConvergenceReport& report, const std::filesystem::path& prefix);

/// Reads (swept_value, w2) pairs from a report CSV, skipping unstable rows.
std::vector<SlopePoint> read_report_points(const std::filesystem::path& path);

/// %.17g formatting used by all text outputs.
std::string format_double(double value);

}  // namespace dsb
