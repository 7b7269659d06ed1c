#include "qrt/dataset_io.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <memory>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "qrt/detail/binary_io.hpp"
#include "qrt/error.hpp"
#include "qrt/json_io.hpp"

namespace qrt {

namespace {

constexpr std::string_view kMagic = "QRTD";

std::uint8_t encode_label(const std::optional<Eigenstate>& label) {
  if (!label) return 2;
  return static_cast<std::uint8_t>(*label);
}

std::optional<Eigenstate> decode_label(std::uint8_t byte, const std::string& path) {
  switch (byte) {
    case 0:
      return Eigenstate::kGround;
    case 1:
      return Eigenstate::kExcited;
    case 2:
      return std::nullopt;
    default:
      throw Error(ErrorKind::kData, fmt::format("{}: invalid label byte {}", path, byte));
  }
}

}  // namespace

std::filesystem::path metadata_path(const std::filesystem::path& dataset) {
  auto p = dataset;
  p += ".json";
  return p;
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path, std::uint32_t n_samples,
                             std::uint64_t count)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc),
      n_samples_(n_samples), expected_(count) {
  if (!out_) {
    throw Error(ErrorKind::kData, fmt::format("cannot open {} for writing", path.string()));
  }
  out_.write(kMagic.data(), kMagic.size());
  detail::write_le(out_, kDatasetFormatVersion);
  detail::write_le(out_, n_samples_);
  detail::write_le(out_, expected_);
}

void DatasetWriter::append(const ShotRecord& record) {
  const auto& w = record.waveform;
  if (w.i_samples.size() != n_samples_ || w.q_samples.size() != n_samples_) {
    throw Error(ErrorKind::kStructural,
                fmt::format("{}: record has {}/{} samples, dataset expects {}", path_.string(),
                            w.i_samples.size(), w.q_samples.size(), n_samples_));
  }
  if (written_ >= expected_) {
    throw Error(ErrorKind::kData,
                fmt::format("{}: more records than the declared {}", path_.string(), expected_));
  }
  detail::write_le(out_, encode_label(record.label));
  detail::write_le(out_, record.time_step_ns.value_or(std::numeric_limits<double>::quiet_NaN()));
  detail::write_le(out_, record.seed);
  detail::write_doubles(out_, w.i_samples);
  detail::write_doubles(out_, w.q_samples);
  ++written_;
}

void DatasetWriter::close() {
  out_.flush();
  if (!out_) throw Error(ErrorKind::kData, fmt::format("{}: write failed", path_.string()));
  if (written_ != expected_) {
    throw Error(ErrorKind::kData, fmt::format("{}: wrote {} of {} declared records",
                                              path_.string(), written_, expected_));
  }
  out_.close();
}

DatasetReader::DatasetReader(const std::filesystem::path& path)
    : path_(path.string()), in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorKind::kData, fmt::format("cannot open dataset {}", path_));
  detail::expect_magic(in_, kMagic, path_);
  const auto version = detail::read_le<std::uint16_t>(in_, "format version");
  if (version != kDatasetFormatVersion) {
    throw Error(ErrorKind::kData,
                fmt::format("{}: unsupported dataset version {}", path_, version));
  }
  n_samples_ = detail::read_le<std::uint32_t>(in_, "n_samples");
  count_ = detail::read_le<std::uint64_t>(in_, "record count");
}

std::optional<ShotRecord> DatasetReader::next() {
  if (read_ >= count_) return std::nullopt;
  ShotRecord r;
  r.label = decode_label(detail::read_le<std::uint8_t>(in_, "label"), path_);
  const double t = detail::read_le<double>(in_, "time step");
  if (!std::isnan(t)) r.time_step_ns = t;
  r.seed = detail::read_le<std::uint64_t>(in_, "seed");
  r.waveform.i_samples.resize(n_samples_);
  r.waveform.q_samples.resize(n_samples_);
  detail::read_doubles(in_, r.waveform.i_samples, "i_samples");
  detail::read_doubles(in_, r.waveform.q_samples, "q_samples");
  ++read_;
  return r;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  DatasetWriter writer(path, dataset.n_samples, dataset.records.size());
  for (const auto& r : dataset.records) writer.append(r);
  writer.close();
}

Dataset read_dataset(const std::filesystem::path& path) {
  DatasetReader reader(path);
  Dataset ds;
  ds.n_samples = reader.n_samples();
  ds.records.reserve(reader.count());
  while (auto r = reader.next()) ds.records.push_back(std::move(*r));
  return ds;
}

void write_metadata(const std::filesystem::path& dataset, const DatasetMetadata& meta) {
  nlohmann::json j = {{"kind", meta.kind},
                      {"system", meta.system},
                      {"readout", meta.readout},
                      {"noise", meta.noise},
                      {"rabi", meta.rabi ? nlohmann::json(*meta.rabi) : nlohmann::json()},
                      {"base_seed", meta.base_seed}};
  const auto path = metadata_path(dataset);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kData, fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

DatasetMetadata read_metadata(const std::filesystem::path& dataset) {
  const auto path = metadata_path(dataset);
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kData, fmt::format("missing metadata {}", path.string()));
  try {
    const auto j = nlohmann::json::parse(in);
    DatasetMetadata meta;
    meta.kind = j.at("kind").get<std::string>();
    meta.system = j.at("system").get<SystemParams>();
    meta.readout = j.at("readout").get<ReadoutConfig>();
    meta.noise = j.at("noise").get<NoiseModel>();
    if (!j.at("rabi").is_null()) meta.rabi = j.at("rabi").get<RabiConfig>();
    meta.base_seed = j.at("base_seed").get<std::uint64_t>();
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kData, fmt::format("cannot open {}", path.string()));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kData, "sha256: digest initialisation failed");
  }
  std::array<char, 1 << 16> buffer{};
  while (in) {
    in.read(buffer.data(), buffer.size());
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &length);
  std::string hex;
  for (unsigned int k = 0; k < length; ++k) hex += fmt::format("{:02x}", digest[k]);
  return hex;
}

}  // namespace qrt
