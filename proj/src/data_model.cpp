#include "gstds/data_model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gstds/errors.hpp"
#include "gstds/rng.hpp"

namespace gstds {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'T', 'D'};
constexpr uint16_t kVersion = 1;

template <class T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::bad_header, "truncated file");
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
  }
  return v;
}

}  // namespace

void FeatureSet::validate() const {
  size_t n = ids.size();
  if (labels.size() != n)
    throw Error(ErrorCode::dimension_mismatch,
                "labels length " + std::to_string(labels.size()) +
                    " != ids length " + std::to_string(n));
  if (features.size() != n * dim)
    throw Error(ErrorCode::dimension_mismatch,
                "features size " + std::to_string(features.size()) +
                    " != N*d = " + std::to_string(n * dim));
  if (!ref_losses.empty() && ref_losses.size() != n)
    throw Error(ErrorCode::dimension_mismatch,
                "ref_losses length " + std::to_string(ref_losses.size()) +
                    " != N = " + std::to_string(n));
  std::set<uint64_t> seen;
  for (size_t i = 0; i < n; ++i) {
    if (!seen.insert(ids[i]).second)
      throw Error(ErrorCode::duplicate_id,
                  "duplicate id " + std::to_string(ids[i]) + " at row " +
                      std::to_string(i));
    if (labels[i] >= class_count)
      throw Error(ErrorCode::label_out_of_range,
                  "label " + std::to_string(labels[i]) + " at row " +
                      std::to_string(i) + " exceeds class count " +
                      std::to_string(class_count));
    bool all_zero = true;
    for (size_t j = 0; j < dim; ++j) {
      float v = features[i * dim + j];
      if (!std::isfinite(v))
        throw Error(ErrorCode::non_finite_value,
                    "non-finite feature at row " + std::to_string(i));
      if (v != 0.0f) all_zero = false;
    }
    if (all_zero)
      throw Error(ErrorCode::zero_feature_row,
                  "all-zero feature vector at row " + std::to_string(i));
    if (!ref_losses.empty()) {
      float l = ref_losses[i];
      if (!std::isfinite(l) || l < 0.0f)
        throw Error(ErrorCode::non_finite_value,
                    "invalid reference loss at row " + std::to_string(i));
    }
  }
}

namespace {

FeatureSet load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorCode::bad_magic, "bad magic in " + path.string());
  uint16_t version = read_le<uint16_t>(in);
  if (version != kVersion)
    throw Error(ErrorCode::bad_header,
                "unsupported version " + std::to_string(version));
  uint8_t flags = read_le<uint8_t>(in);
  uint64_t n = read_le<uint64_t>(in);
  uint32_t d = read_le<uint32_t>(in);
  uint32_t c = read_le<uint32_t>(in);
  if (d == 0 || c == 0)
    throw Error(ErrorCode::bad_header, "zero dimension or class count");

  FeatureSet fs;
  fs.dim = d;
  fs.class_count = c;
  fs.features.resize(n * d);
  for (auto& v : fs.features) v = read_le<float>(in);
  fs.labels.resize(n);
  for (auto& v : fs.labels) v = read_le<uint32_t>(in);
  if (flags & 1u) {
    fs.ref_losses.resize(n);
    for (auto& v : fs.ref_losses) v = read_le<float>(in);
  }
  fs.ids.resize(n);
  for (uint64_t i = 0; i < n; ++i) fs.ids[i] = i;
  // ids carried explicitly at the end, after the fixed sections
  if (in.peek() != EOF) {
    for (auto& v : fs.ids) v = read_le<uint64_t>(in);
  }
  fs.validate();
  return fs;
}

void save_binary(const FeatureSet& fs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(kMagic, 4);
  write_le<uint16_t>(out, kVersion);
  write_le<uint8_t>(out, fs.has_ref_losses() ? 1 : 0);
  write_le<uint64_t>(out, fs.size());
  write_le<uint32_t>(out, static_cast<uint32_t>(fs.dim));
  write_le<uint32_t>(out, fs.class_count);
  for (float v : fs.features) write_le<float>(out, v);
  for (uint32_t v : fs.labels) write_le<uint32_t>(out, v);
  for (float v : fs.ref_losses) write_le<float>(out, v);
  bool ids_sequential = true;
  for (size_t i = 0; i < fs.size(); ++i)
    if (fs.ids[i] != i) ids_sequential = false;
  if (!ids_sequential)
    for (uint64_t v : fs.ids) write_le<uint64_t>(out, v);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

FeatureSet load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::bad_header, "empty csv " + path.string());
  auto header = split_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label")
    throw Error(ErrorCode::bad_header, "csv header must start id,label");
  bool has_loss = header.size() > 2 && header[2] == "loss";
  size_t feature_start = has_loss ? 3 : 2;
  size_t d = header.size() - feature_start;
  if (d == 0) throw Error(ErrorCode::bad_header, "csv has no feature columns");

  FeatureSet fs;
  fs.dim = d;
  size_t row = 0;
  uint32_t max_label = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::dimension_mismatch,
                  "csv row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    try {
      fs.ids.push_back(std::stoull(fields[0]));
      uint32_t label = static_cast<uint32_t>(std::stoul(fields[1]));
      fs.labels.push_back(label);
      max_label = std::max(max_label, label);
      if (has_loss) fs.ref_losses.push_back(std::stof(fields[2]));
      for (size_t j = 0; j < d; ++j)
        fs.features.push_back(std::stof(fields[feature_start + j]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::bad_header,
                  "unparsable value in csv row " + std::to_string(row));
    }
    ++row;
  }
  fs.class_count = max_label + 1;
  fs.validate();
  return fs;
}

void save_csv(const FeatureSet& fs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "id,label";
  if (fs.has_ref_losses()) out << ",loss";
  for (size_t j = 0; j < fs.dim; ++j) out << ",f" << j;
  out << "\n";
  char buf[64];
  for (size_t i = 0; i < fs.size(); ++i) {
    out << fs.ids[i] << "," << fs.labels[i];
    if (fs.has_ref_losses()) {
      std::snprintf(buf, sizeof(buf), "%.9g", fs.ref_losses[i]);
      out << "," << buf;
    }
    for (size_t j = 0; j < fs.dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", fs.features[i * fs.dim + j]);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace

FeatureSet load_featureset(const std::filesystem::path& path,
                           FileFormat format) {
  return format == FileFormat::binary ? load_binary(path) : load_csv(path);
}

void save_featureset(const FeatureSet& fs, const std::filesystem::path& path,
                     FileFormat format) {
  if (format == FileFormat::binary)
    save_binary(fs, path);
  else
    save_csv(fs, path);
}

namespace {

FeatureSet subset(const FeatureSet& fs, const std::vector<size_t>& idx) {
  FeatureSet out;
  out.dim = fs.dim;
  out.class_count = fs.class_count;
  out.ids.reserve(idx.size());
  for (size_t i : idx) {
    out.ids.push_back(fs.ids[i]);
    out.labels.push_back(fs.labels[i]);
    auto r = fs.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    if (fs.has_ref_losses()) out.ref_losses.push_back(fs.ref_losses[i]);
  }
  return out;
}

}  // namespace

Splits split(const FeatureSet& fs, const SplitSpec& spec) {
  double fractions[3] = {spec.train_fraction, spec.val_fraction,
                         spec.test_fraction};
  double sum = fractions[0] + fractions[1] + fractions[2];
  for (double f : fractions)
    if (f <= 0.0 || f >= 1.0)
      throw Error(ErrorCode::invalid_argument,
                  "split fractions must lie in (0,1)");
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::invalid_argument, "split fractions must sum to 1");
  if (fs.size() < 3)
    throw Error(ErrorCode::invalid_argument,
                "need at least 3 samples for a three-way split");

  std::map<uint32_t, std::vector<size_t>> by_class;
  for (size_t i = 0; i < fs.size(); ++i) by_class[fs.labels[i]].push_back(i);

  std::vector<size_t> assigned[3];
  RngStream rng(RngStream::mix(spec.seed ^ 0x511177ull));
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    size_t n = members.size();
    // largest-remainder apportionment of n across the three splits
    size_t counts[3];
    double rem[3];
    size_t total = 0;
    for (int s = 0; s < 3; ++s) {
      double exact = fractions[s] * static_cast<double>(n);
      counts[s] = static_cast<size_t>(std::floor(exact));
      rem[s] = exact - static_cast<double>(counts[s]);
      total += counts[s];
    }
    while (total < n) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (rem[s] > rem[best]) best = s;
      counts[best] += 1;
      rem[best] = -1.0;
      ++total;
    }
    size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (size_t k = 0; k < counts[s]; ++k) assigned[s].push_back(members[pos++]);
  }

  for (int s = 0; s < 3; ++s) {
    if (assigned[s].empty()) {
      std::string starved;
      for (auto& [label, members] : by_class)
        if (members.size() < 3) starved += " " + std::to_string(label);
      throw Error(ErrorCode::invalid_argument,
                  "split too small for stratification; starved classes:" +
                      (starved.empty() ? " (all)" : starved));
    }
    std::sort(assigned[s].begin(), assigned[s].end());
  }

  Splits out;
  out.train = subset(fs, assigned[0]);
  out.val = subset(fs, assigned[1]);
  out.test = subset(fs, assigned[2]);
  return out;
}

BatchPlan partition_batches(size_t n, size_t batch_size, uint64_t seed) {
  if (batch_size == 0 || batch_size > n)
    throw Error(ErrorCode::invalid_argument,
                "batch_size " + std::to_string(batch_size) +
                    " must lie in [1, N=" + std::to_string(n) + "]");
  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  RngStream rng(RngStream::mix(seed ^ 0xba7c4ull));
  rng.shuffle(perm);

  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.seed = seed;
  for (size_t start = 0; start < n; start += batch_size) {
    size_t end = std::min(start + batch_size, n);
    plan.batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return plan;
}

BatchPlan partition_batches(const FeatureSet& fs, size_t batch_size,
                            uint64_t seed) {
  return partition_batches(fs.size(), batch_size, seed);
}

}  // namespace gstds
