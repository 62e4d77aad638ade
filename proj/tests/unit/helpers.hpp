#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cil/data.hpp"
#include "cil/nn.hpp"
#include "cil/rng.hpp"
#include "cil/stream.hpp"

namespace test_helpers {

inline cil::Batch random_batch(cil::Rng& rng, std::size_t n, std::size_t dim,
                               std::size_t n_classes) {
  cil::Batch batch;
  batch.features = cil::Matrix(n, dim);
  for (std::size_t i = 0; i < batch.features.size(); ++i)
    batch.features.data()[i] = rng.normal();
  batch.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    batch.labels[i] = static_cast<int>(rng.uniform_index(n_classes));
  return batch;
}

inline cil::Experience batch_as_experience(const cil::Batch& batch, int index = 1) {
  cil::Experience exp;
  exp.index = index;
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    cil::Sample s;
    s.features.assign(batch.features.row(i), batch.features.row(i) + batch.features.cols());
    s.label = batch.labels[i];
    exp.samples.push_back(std::move(s));
  }
  return exp;
}

inline cil::Dataset toy_dataset(cil::Rng& rng, std::size_t n, std::size_t dim,
                                std::size_t n_classes, double separation = 3.0) {
  cil::Dataset ds;
  ds.name = "toy";
  ds.dim = dim;
  ds.n_classes = n_classes;
  for (std::size_t i = 0; i < n; ++i) {
    cil::Sample s;
    s.label = static_cast<int>(i % n_classes);
    s.features.resize(dim);
    for (std::size_t k = 0; k < dim; ++k)
      s.features[k] = rng.normal() + (k == 0 ? separation * s.label : 0.0);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Scratch directory under the build tree, wiped on construction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("cil_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace test_helpers
