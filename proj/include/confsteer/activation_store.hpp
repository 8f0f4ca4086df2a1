#pragma once

#include "confsteer/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace confsteer {

enum class Condition { pure_correctness, pure_confidence, joint };
enum class Position { prompt_final, answer_final };
enum class Split { train, val, test };

std::string_view to_string(Condition c);
std::string_view to_string(Position p);
std::string_view to_string(Split s);
Condition parse_condition(std::string_view s);
Position parse_position(std::string_view s);
Split parse_split(std::string_view s);

struct RowMeta {
  std::string question_id;
  std::string dataset_name;
  std::optional<int> framing;
  std::optional<double> verbalized_confidence;
  std::optional<bool> correct;
  std::optional<double> empirical_accuracy;
  std::optional<Split> split;

  bool operator==(const RowMeta &) const = default;
};

/// Residual-stream activations for one (layer, condition, position), one row
/// per elicitation instance, with aligned per-row metadata.
struct ActivationDataset {
  int layer = 0;
  std::string model_id;
  Condition condition = Condition::pure_confidence;
  Position position = Position::prompt_final;
  ActivationMatrix rows;
  std::vector<RowMeta> meta;

  Eigen::Index dim() const { return rows.cols(); }
  std::size_t size() const { return meta.size(); }

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  std::vector<std::size_t> indices_in(Split split) const;
  ActivationDataset select(const std::vector<std::size_t> &indices) const;
  MatrixXd features(const std::vector<std::size_t> &indices) const;

  /// Bit-exact comparison of payload and metadata.
  bool operator==(const ActivationDataset &other) const;
};

struct Manifest {
  static constexpr int kVersion = 1;

  int version = kVersion;
  std::string dtype = "f32";
  std::string endianness = "little";
  std::int64_t rows = 0;
  std::int64_t dim = 0;
  int layer = 0;
  std::string model_id;
  std::string condition;
  std::string position;
  std::uint32_t checksum = 0;
};

inline constexpr const char *kManifestFile = "manifest.json";
inline constexpr const char *kActivationsFile = "activations.f32";
inline constexpr const char *kMetaFile = "meta.jsonl";

/// Row-major little-endian float32 bytes of the activation matrix.
std::vector<std::byte> activation_payload(const ActivationMatrix &rows);

/// Writes manifest.json, activations.f32 and meta.jsonl into `dir`. The
/// directory is assembled under a temporary name and renamed into place.
void write_dataset(const ActivationDataset &ds, const std::filesystem::path &dir);

ActivationDataset read_dataset(const std::filesystem::path &dir);
Manifest read_manifest(const std::filesystem::path &dir);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Assigns every row a split from a stable hash of (question_id, seed); all
/// rows of a question share one split.
ActivationDataset split_by_question(const ActivationDataset &ds,
                                    SplitFractions fractions,
                                    std::uint64_t seed);

/// The uniform draw in [0,1) that decides a question's split.
double question_hash_unit(std::string_view question_id, std::uint64_t seed);

} // namespace confsteer
