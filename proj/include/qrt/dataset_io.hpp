#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "qrt/signal_model.hpp"

namespace qrt {

// Binary dataset layout (all integers and floats little-endian):
//
//   header:  "QRTD" | version u16 | n_samples u32 | record count u64
//   record:  label u8 (0 ground, 1 excited, 2 untagged)
//            | time_step f64 ns (NaN if absent) | seed u64
//            | i_samples f64[n_samples] | q_samples f64[n_samples]
//
// Provenance lives in a JSON sidecar next to the file ("<file>.json").

inline constexpr std::uint16_t kDatasetFormatVersion = 1;

struct Dataset {
  std::uint32_t n_samples = 0;
  std::vector<ShotRecord> records;
};

struct DatasetMetadata {
  std::string kind;  // "train", "test", "rabi", ...
  SystemParams system;
  ReadoutConfig readout;
  NoiseModel noise;
  std::optional<RabiConfig> rabi;
  std::uint64_t base_seed = 0;
};

std::filesystem::path metadata_path(const std::filesystem::path& dataset);

/// Streams records into a dataset file whose record count is fixed up front.
class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, std::uint32_t n_samples, std::uint64_t count);
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  /// Throws Error(kStructural) on a waveform of the wrong length and
  /// Error(kData) past the declared count.
  void append(const ShotRecord& record);
  /// Flushes; throws Error(kData) if fewer records than declared were written.
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint32_t n_samples_;
  std::uint64_t expected_;
  std::uint64_t written_ = 0;
};

/// Sequential reader; validates magic, version and record framing.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  std::uint32_t n_samples() const { return n_samples_; }
  std::uint64_t count() const { return count_; }
  std::optional<ShotRecord> next();

 private:
  std::string path_;
  std::ifstream in_;
  std::uint32_t n_samples_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t read_ = 0;
};

void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

void write_metadata(const std::filesystem::path& dataset, const DatasetMetadata& meta);
DatasetMetadata read_metadata(const std::filesystem::path& dataset);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace qrt
