#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cil {

struct Sample {
  std::vector<double> features;
  int label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Identifiers of the document/live images a difference vector came from.
// Optional metadata; the on-disk formats carry features and labels only.
struct PairProvenance {
  std::uint32_t doc_id = 0;
  std::uint32_t live_id = 0;
};

struct Dataset {
  std::string name;
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  std::vector<Sample> samples;
  std::vector<PairProvenance> provenance;  // empty when unknown

  std::size_t size() const { return samples.size(); }
};

// Feature/label content equality (name and provenance excluded).
bool content_equal(const Dataset& a, const Dataset& b);

// Element-wise doc - live.
std::vector<double> pair_difference(const std::vector<double>& doc_feature,
                                    const std::vector<double>& live_feature);

// Desk-scale stand-in for multi-site data: every source draws from the same
// class-conditional Gaussians, but each source shifts each class mean by a
// random offset of fixed magnitude (cross-dataset drift). The test set uses
// a fresh offset so evaluation is always cross-domain.
struct SynthSourceSpec {
  std::size_t n_sources = 4;
  std::size_t n_classes = 2;
  std::size_t dim = 16;
  std::size_t samples_per_class = 150;       // per source
  std::size_t test_samples_per_class = 0;    // 0 = same as samples_per_class
  double shift_magnitude = 2.0;              // norm of each per-source class-mean offset
  double within_class_scale = 1.0;           // within-class standard deviation
  std::uint64_t seed = 0;
};

struct SynthSources {
  std::vector<Dataset> train;
  Dataset test;
};

SynthSources synth_sources(const SynthSourceSpec& spec);

// Binary dataset format, little-endian:
//   bytes 0..3   magic "CLF1"
//   u32 version (1), u32 n, u32 d, u32 C, u32 float_bits (64 or 32)
//   n records of d floats (f64 or f32) followed by a u32 label
void save_dataset(const Dataset& ds, const std::string& path, int float_bits = 64);
Dataset load_dataset(const std::string& path);

// CSV with header "f0,...,f{d-1},label"; class count inferred from labels.
Dataset load_dataset_csv(const std::string& path);

}  // namespace cil
