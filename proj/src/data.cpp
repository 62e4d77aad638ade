#include "cil/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

bool content_equal(const Dataset& a, const Dataset& b) {
  return a.dim == b.dim && a.n_classes == b.n_classes && a.samples == b.samples;
}

std::vector<double> pair_difference(const std::vector<double>& doc_feature,
                                    const std::vector<double>& live_feature) {
  if (doc_feature.size() != live_feature.size())
    throw ShapeError("pair_difference: feature dims differ");
  std::vector<double> out(doc_feature.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = doc_feature[i] - live_feature[i];
  return out;
}

namespace {

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

Dataset make_source(const SynthSourceSpec& spec,
                    const std::vector<std::vector<double>>& class_means,
                    std::uint64_t seed, const std::string& name,
                    std::size_t per_class) {
  Rng rng(seed);
  Dataset ds;
  ds.name = name;
  ds.dim = spec.dim;
  ds.n_classes = spec.n_classes;
  ds.samples.reserve(spec.n_classes * per_class);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    std::vector<double> offset = unit_vector(rng, spec.dim);
    for (double& x : offset) x *= spec.shift_magnitude;
    for (std::size_t s = 0; s < per_class; ++s) {
      Sample sample;
      sample.label = static_cast<int>(c);
      sample.features.resize(spec.dim);
      for (std::size_t k = 0; k < spec.dim; ++k)
        sample.features[k] =
            class_means[c][k] + offset[k] + spec.within_class_scale * rng.normal();
      ds.samples.push_back(std::move(sample));
    }
  }
  rng.shuffle(ds.samples);
  return ds;
}

}  // namespace

// Global class means sit on a fixed-radius sphere so shift_magnitude is
// directly comparable to the class separation (~radius*sqrt(2)): shift 0
// means i.i.d. sources, shift ~2 strong cross-source drift.
constexpr double kClassRadius = 2.5;

SynthSources synth_sources(const SynthSourceSpec& spec) {
  if (spec.n_sources == 0 || spec.n_classes == 0 || spec.samples_per_class == 0)
    throw ConfigError("synth_sources: counts must be positive");
  if (spec.dim < 2) throw ConfigError("synth_sources: dim must be at least 2");

  Rng global(derive_seed(spec.seed, {seed_tag::synth_global}));
  std::vector<std::vector<double>> class_means(spec.n_classes);
  for (auto& mean : class_means) {
    mean = unit_vector(global, spec.dim);
    for (double& x : mean) x *= kClassRadius;
  }

  SynthSources out;
  out.train.reserve(spec.n_sources);
  for (std::size_t s = 0; s < spec.n_sources; ++s)
    out.train.push_back(make_source(
        spec, class_means, derive_seed(spec.seed, {seed_tag::synth_train, s}),
        "synth-src" + std::to_string(s), spec.samples_per_class));
  const std::size_t test_per_class = spec.test_samples_per_class > 0
                                         ? spec.test_samples_per_class
                                         : spec.samples_per_class;
  out.test = make_source(spec, class_means,
                         derive_seed(spec.seed, {seed_tag::synth_test}), "synth-test",
                         test_per_class);
  return out;
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'L', 'F', '1'};
constexpr std::size_t kHeaderBytes = 4 + 5 * 4;

void put_u32(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

[[noreturn]] void format_fail(const std::string& path, std::size_t offset,
                              const std::string& what) {
  throw FormatError(path + ": " + what + " (byte " + std::to_string(offset) + ")");
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path, int float_bits) {
  if (float_bits != 32 && float_bits != 64)
    throw ConfigError("save_dataset: float width must be 32 or 64");
  if (ds.samples.empty()) throw ConfigError("save_dataset: empty dataset");

  std::string buf;
  buf.reserve(kHeaderBytes + ds.samples.size() * (ds.dim * (float_bits / 8) + 4));
  buf.append(kMagic, 4);
  put_u32(buf, 1);
  put_u32(buf, static_cast<std::uint32_t>(ds.samples.size()));
  put_u32(buf, static_cast<std::uint32_t>(ds.dim));
  put_u32(buf, static_cast<std::uint32_t>(ds.n_classes));
  put_u32(buf, static_cast<std::uint32_t>(float_bits));
  for (const Sample& s : ds.samples) {
    if (s.features.size() != ds.dim)
      throw ShapeError("save_dataset: sample dim mismatch in '" + ds.name + "'");
    for (double f : s.features) {
      if (float_bits == 64) {
        put_u64(buf, std::bit_cast<std::uint64_t>(f));
      } else {
        put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(f)));
      }
    }
    put_u32(buf, static_cast<std::uint32_t>(s.label));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_dataset: cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("save_dataset: write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_dataset: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());

  if (buf.size() < kHeaderBytes) format_fail(path, buf.size(), "truncated header");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) format_fail(path, 0, "bad magic");
  const std::uint32_t version = get_u32(p + 4);
  if (version != 1) format_fail(path, 4, "unsupported version " + std::to_string(version));
  const std::uint32_t n = get_u32(p + 8);
  const std::uint32_t d = get_u32(p + 12);
  const std::uint32_t c = get_u32(p + 16);
  const std::uint32_t float_bits = get_u32(p + 20);
  if (n == 0) format_fail(path, 8, "dataset declares zero samples");
  if (d == 0) format_fail(path, 12, "dataset declares zero feature dim");
  if (c == 0) format_fail(path, 16, "dataset declares zero classes");
  if (float_bits != 32 && float_bits != 64)
    format_fail(path, 20, "float width must be 32 or 64");

  const std::size_t record = static_cast<std::size_t>(d) * (float_bits / 8) + 4;
  const std::size_t expected = kHeaderBytes + static_cast<std::size_t>(n) * record;
  if (buf.size() < expected)
    format_fail(path, buf.size(),
                "truncated: expected " + std::to_string(expected) + " bytes");
  if (buf.size() > expected)
    format_fail(path, expected, "trailing bytes after last record");

  Dataset ds;
  ds.name = std::filesystem::path(path).stem().string();
  ds.dim = d;
  ds.n_classes = c;
  ds.samples.resize(n);
  std::size_t off = kHeaderBytes;
  for (std::uint32_t i = 0; i < n; ++i) {
    Sample& s = ds.samples[i];
    s.features.resize(d);
    for (std::uint32_t k = 0; k < d; ++k) {
      if (float_bits == 64) {
        s.features[k] = std::bit_cast<double>(get_u64(p + off));
        off += 8;
      } else {
        s.features[k] = static_cast<double>(std::bit_cast<float>(get_u32(p + off)));
        off += 4;
      }
      if (!std::isfinite(s.features[k]))
        format_fail(path, off, "non-finite feature in record " + std::to_string(i));
    }
    const std::uint32_t label = get_u32(p + off);
    off += 4;
    if (label >= c)
      format_fail(path, off - 4,
                  "label " + std::to_string(label) + " >= " + std::to_string(c) +
                      " in record " + std::to_string(i));
    s.label = static_cast<int>(label);
  }
  return ds;
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_dataset_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  // header: f0,...,f{d-1},label
  std::size_t d = 0;
  {
    std::stringstream ss(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() < 2 || cols.back() != "label")
      throw FormatError(path + ": header must be f0,...,f{d-1},label");
    for (std::size_t i = 0; i + 1 < cols.size(); ++i)
      if (cols[i] != "f" + std::to_string(i))
        throw FormatError(path + ": unexpected header column '" + cols[i] + "'");
    d = cols.size() - 1;
  }

  Dataset ds;
  ds.name = std::filesystem::path(path).stem().string();
  ds.dim = d;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Sample s;
    s.features.reserve(d);
    const char* ptr = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t i = 0; i <= d; ++i) {
      if (i > 0) {
        if (ptr >= end || *ptr != ',')
          throw FormatError(path + ": line " + std::to_string(line_no) +
                            ": expected " + std::to_string(d + 1) + " columns");
        ++ptr;
      }
      if (i < d) {
        double v = 0.0;
        auto [next, ec] = std::from_chars(ptr, end, v);
        if (ec != std::errc())
          throw FormatError(path + ": line " + std::to_string(line_no) +
                            ": bad number in column " + std::to_string(i));
        s.features.push_back(v);
        ptr = next;
      } else {
        int label = 0;
        auto [next, ec] = std::from_chars(ptr, end, label);
        if (ec != std::errc() || next != end || label < 0)
          throw FormatError(path + ": line " + std::to_string(line_no) + ": bad label");
        s.label = label;
        max_label = std::max(max_label, label);
      }
    }
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw FormatError(path + ": no data rows");
  ds.n_classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

}  // namespace cil
