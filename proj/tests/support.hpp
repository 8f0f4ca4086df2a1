#pragma once

#include "confsteer/activation_store.hpp"
#include "confsteer/rng.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string &tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("confsteer-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline confsteer::ActivationDataset tiny_dataset(int n_questions = 4, int rows_per_q = 2,
                                                 int dim = 3, std::uint64_t seed = 1) {
  using namespace confsteer;
  ActivationDataset ds;
  ds.layer = 7;
  ds.model_id = "tiny";
  ds.condition = Condition::pure_confidence;
  ds.position = Position::answer_final;
  ds.rows.resize(n_questions * rows_per_q, dim);
  Xoshiro256 rng(seed);
  for (int q = 0; q < n_questions; ++q)
    for (int r = 0; r < rows_per_q; ++r) {
      const int i = q * rows_per_q + r;
      for (int j = 0; j < dim; ++j)
        ds.rows(i, j) = static_cast<float>(rng.normal());
      RowMeta m;
      m.question_id = "q" + std::to_string(q);
      m.dataset_name = "toy";
      m.framing = r % 11 + 1;
      m.verbalized_confidence = rng.uniform();
      m.correct = rng.bernoulli(0.5);
      m.empirical_accuracy = q % 2 ? 0.25 : 0.75;
      ds.meta.push_back(m);
    }
  return ds;
}

} // namespace testutil
