#include "confsteer/activation_store.hpp"

#include "confsteer/codec.hpp"
#include "confsteer/rng.hpp"

#include "json.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace confsteer {

std::string_view to_string(Condition c) {
  switch (c) {
  case Condition::pure_correctness:
    return "pure_correctness";
  case Condition::pure_confidence:
    return "pure_confidence";
  case Condition::joint:
    return "joint";
  }
  return "?";
}

std::string_view to_string(Position p) {
  return p == Position::prompt_final ? "prompt_final" : "answer_final";
}

std::string_view to_string(Split s) {
  switch (s) {
  case Split::train:
    return "train";
  case Split::val:
    return "val";
  case Split::test:
    return "test";
  }
  return "?";
}

Condition parse_condition(std::string_view s) {
  if (s == "pure_correctness")
    return Condition::pure_correctness;
  if (s == "pure_confidence")
    return Condition::pure_confidence;
  if (s == "joint")
    return Condition::joint;
  throw ValidationError("unknown condition '" + std::string(s) + "'");
}

Position parse_position(std::string_view s) {
  if (s == "prompt_final")
    return Position::prompt_final;
  if (s == "answer_final")
    return Position::answer_final;
  throw ValidationError("unknown position '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  if (s == "train")
    return Split::train;
  if (s == "val")
    return Split::val;
  if (s == "test")
    return Split::test;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

void ActivationDataset::validate() const {
  if (rows.rows() != static_cast<Eigen::Index>(meta.size()))
    throw ValidationError("dataset has " + std::to_string(rows.rows()) +
                          " activation rows but " + std::to_string(meta.size()) +
                          " metadata rows");
  if (layer < 0)
    throw ValidationError("layer must be >= 0");
  if (rows.rows() > 0 && rows.cols() < 1)
    throw ValidationError("dim must be positive");
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    if (!rows.row(i).allFinite())
      throw ValidationError("row " + std::to_string(i) +
                            " contains a non-finite activation");
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const auto &m = meta[i];
    auto in_unit = [](const std::optional<double> &v) {
      return !v || (*v >= 0.0 && *v <= 1.0);
    };
    if (!in_unit(m.verbalized_confidence))
      throw ValidationError("row " + std::to_string(i) +
                            ": verbalized_confidence outside [0,1]");
    if (!in_unit(m.empirical_accuracy))
      throw ValidationError("row " + std::to_string(i) +
                            ": empirical_accuracy outside [0,1]");
    if (m.framing && condition == Condition::pure_correctness)
      throw ValidationError("row " + std::to_string(i) +
                            ": framing is only valid for pure_confidence or "
                            "joint datasets");
    if (m.framing && *m.framing < 1)
      throw ValidationError("row " + std::to_string(i) + ": framing must be >= 1");
  }
}

bool ActivationDataset::operator==(const ActivationDataset &other) const {
  if (layer != other.layer || model_id != other.model_id ||
      condition != other.condition || position != other.position ||
      meta != other.meta || rows.rows() != other.rows.rows() ||
      rows.cols() != other.rows.cols())
    return false;
  return rows.size() == 0 ||
         std::memcmp(rows.data(), other.rows.data(),
                     static_cast<std::size_t>(rows.size()) * sizeof(float)) == 0;
}

std::vector<std::size_t> ActivationDataset::indices_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < meta.size(); ++i)
    if (meta[i].split == split)
      out.push_back(i);
  return out;
}

ActivationDataset
ActivationDataset::select(const std::vector<std::size_t> &indices) const {
  ActivationDataset out;
  out.layer = layer;
  out.model_id = model_id;
  out.condition = condition;
  out.position = position;
  out.rows.resize(static_cast<Eigen::Index>(indices.size()), rows.cols());
  out.meta.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.rows.row(static_cast<Eigen::Index>(k)) =
        rows.row(static_cast<Eigen::Index>(indices[k]));
    out.meta.push_back(meta[indices[k]]);
  }
  return out;
}

MatrixXd ActivationDataset::features(const std::vector<std::size_t> &indices) const {
  MatrixXd X(static_cast<Eigen::Index>(indices.size()), rows.cols());
  for (std::size_t k = 0; k < indices.size(); ++k)
    X.row(static_cast<Eigen::Index>(k)) =
        rows.row(static_cast<Eigen::Index>(indices[k])).cast<double>();
  return X;
}

std::vector<std::byte> activation_payload(const ActivationMatrix &rows) {
  std::vector<std::byte> bytes(static_cast<std::size_t>(rows.size()) * 4);
  const float *src = rows.data();
  for (std::size_t i = 0; i < static_cast<std::size_t>(rows.size()); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(src[i]);
    for (std::size_t b = 0; b < 4; ++b)
      bytes[i * 4 + b] = static_cast<std::byte>((bits >> (8 * b)) & 0xFF);
  }
  return bytes;
}

namespace {

template <typename T> json opt(const std::optional<T> &v) {
  return v ? json(*v) : json(nullptr);
}

json meta_to_json(const RowMeta &m, const ActivationDataset &ds) {
  json j;
  j["question_id"] = m.question_id;
  j["dataset_name"] = m.dataset_name;
  j["framing"] = opt(m.framing);
  j["verbalized_confidence"] = opt(m.verbalized_confidence);
  j["correct"] = opt(m.correct);
  j["empirical_accuracy"] = opt(m.empirical_accuracy);
  j["split"] = m.split ? json(std::string(to_string(*m.split))) : json(nullptr);
  j["condition"] = std::string(to_string(ds.condition));
  j["position"] = std::string(to_string(ds.position));
  return j;
}

template <typename T>
std::optional<T> get_opt(const json &j, const char *key, std::size_t row) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null())
    return std::nullopt;
  try {
    return it->get<T>();
  } catch (const json::exception &) {
    throw ValidationError("meta row " + std::to_string(row) + ": field '" + key +
                          "' has the wrong type");
  }
}

RowMeta meta_from_json(const json &j, std::size_t row) {
  RowMeta m;
  m.question_id = get_opt<std::string>(j, "question_id", row).value_or("");
  m.dataset_name = get_opt<std::string>(j, "dataset_name", row).value_or("");
  m.framing = get_opt<int>(j, "framing", row);
  m.verbalized_confidence = get_opt<double>(j, "verbalized_confidence", row);
  m.correct = get_opt<bool>(j, "correct", row);
  m.empirical_accuracy = get_opt<double>(j, "empirical_accuracy", row);
  if (auto s = get_opt<std::string>(j, "split", row))
    m.split = parse_split(*s);
  return m;
}

void write_file(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

void write_dataset(const ActivationDataset &ds, const fs::path &dir) {
  ds.validate();
  const auto payload = activation_payload(ds.rows);

  json manifest;
  manifest["version"] = Manifest::kVersion;
  manifest["dtype"] = "f32";
  manifest["endianness"] = "little";
  manifest["rows"] = ds.rows.rows();
  manifest["dim"] = ds.rows.cols();
  manifest["layer"] = ds.layer;
  manifest["model_id"] = ds.model_id;
  manifest["condition"] = std::string(to_string(ds.condition));
  manifest["position"] = std::string(to_string(ds.position));
  manifest["checksum"] = crc32(payload);

  std::string meta_lines;
  for (const auto &m : ds.meta)
    meta_lines += meta_to_json(m, ds).dump() + "\n";

  std::error_code ec;
  const fs::path target = fs::absolute(dir);
  fs::create_directories(target.parent_path(), ec);
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp-" +
                        std::to_string(::getpid()));
  fs::remove_all(tmp, ec);
  if (!fs::create_directory(tmp, ec))
    throw IoError("cannot create '" + tmp.string() + "': " + ec.message());
  try {
    write_file(tmp / kManifestFile, manifest.dump(2) + "\n");
    write_file(tmp / kActivationsFile,
               std::string(reinterpret_cast<const char *>(payload.data()),
                           payload.size()));
    write_file(tmp / kMetaFile, meta_lines);
    if (fs::exists(target))
      fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (const fs::filesystem_error &e) {
    fs::remove_all(tmp, ec);
    throw IoError(e.what());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

Manifest read_manifest(const fs::path &dir) {
  if (!fs::is_directory(dir))
    throw IoError("dataset directory '" + dir.string() + "' does not exist");
  json j;
  try {
    j = json::parse(read_file(dir / kManifestFile));
  } catch (const json::parse_error &e) {
    throw ValidationError("manifest.json in '" + dir.string() +
                          "' is not valid JSON: " + e.what());
  }
  Manifest m;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != Manifest::kVersion)
      throw ValidationError("unknown manifest version " +
                            std::to_string(m.version));
    m.dtype = j.at("dtype").get<std::string>();
    m.endianness = j.at("endianness").get<std::string>();
    m.rows = j.at("rows").get<std::int64_t>();
    m.dim = j.at("dim").get<std::int64_t>();
    m.layer = j.at("layer").get<int>();
    m.model_id = j.at("model_id").get<std::string>();
    m.condition = j.at("condition").get<std::string>();
    m.position = j.at("position").get<std::string>();
    m.checksum = j.at("checksum").get<std::uint32_t>();
  } catch (const json::exception &e) {
    throw ValidationError("manifest.json in '" + dir.string() +
                          "' is malformed: " + e.what());
  }
  if (m.dtype != "f32")
    throw ValidationError("unsupported dtype '" + m.dtype + "'");
  if (m.endianness != "little")
    throw ValidationError("unsupported endianness '" + m.endianness + "'");
  if (m.rows < 0 || m.dim < 1)
    throw ValidationError("manifest rows/dim out of range");
  return m;
}

ActivationDataset read_dataset(const fs::path &dir) {
  const Manifest manifest = read_manifest(dir);
  const std::string payload = read_file(dir / kActivationsFile);
  const auto expected =
      static_cast<std::uint64_t>(manifest.rows) * static_cast<std::uint64_t>(manifest.dim) * 4;
  if (payload.size() != expected)
    throw ValidationError("activation payload length mismatch: expected " +
                          std::to_string(expected) + " bytes, found " +
                          std::to_string(payload.size()));
  const auto *bytes = reinterpret_cast<const std::byte *>(payload.data());
  const std::uint32_t crc = crc32({bytes, payload.size()});
  if (crc != manifest.checksum)
    throw ValidationError("activation payload checksum mismatch in '" +
                          dir.string() + "'");

  ActivationDataset ds;
  ds.layer = manifest.layer;
  ds.model_id = manifest.model_id;
  ds.condition = parse_condition(manifest.condition);
  ds.position = parse_position(manifest.position);
  ds.rows.resize(manifest.rows, manifest.dim);
  float *dst = ds.rows.data();
  for (std::size_t i = 0; i < payload.size() / 4; ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b)
      bits |= std::to_integer<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    dst[i] = std::bit_cast<float>(bits);
  }

  std::istringstream lines(read_file(dir / kMetaFile));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const std::size_t row = ds.meta.size();
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error &e) {
      throw ValidationError("meta row " + std::to_string(row) +
                            " is not valid JSON: " + e.what());
    }
    if (auto c = get_opt<std::string>(j, "condition", row);
        c && parse_condition(*c) != ds.condition)
      throw ValidationError("meta row " + std::to_string(row) +
                            ": condition differs from manifest");
    if (auto p = get_opt<std::string>(j, "position", row);
        p && parse_position(*p) != ds.position)
      throw ValidationError("meta row " + std::to_string(row) +
                            ": position differs from manifest");
    ds.meta.push_back(meta_from_json(j, row));
  }
  ds.validate();
  return ds;
}

double question_hash_unit(std::string_view question_id, std::uint64_t seed) {
  // FNV-1a over the id bytes, then mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : question_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  const std::uint64_t mixed = SplitMix64::mix(h ^ SplitMix64::mix(seed));
  return static_cast<double>(mixed >> 11) * 0x1.0p-53;
}

ActivationDataset split_by_question(const ActivationDataset &ds,
                                    SplitFractions f, std::uint64_t seed) {
  if (ds.size() == 0)
    throw ValidationError("split_by_question: empty dataset");
  if (!(f.train > 0 && f.val > 0 && f.test > 0))
    throw ValidationError("split fractions must be positive");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");

  ActivationDataset out = ds;
  for (auto &m : out.meta) {
    const double u = question_hash_unit(m.question_id, seed);
    m.split = u < f.train           ? Split::train
              : u < f.train + f.val ? Split::val
                                    : Split::test;
  }
  return out;
}

} // namespace confsteer
