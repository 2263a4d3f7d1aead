// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace dpl {

void Dataset::validate() const {
  if (instances.empty())
    throw FormatError("dataset: empty");
  if (num_classes == 0)
    throw FormatError("dataset: num_classes is zero");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.feature.size() != feature_dim)
      throw FormatError("dataset: instance " + std::to_string(i) +
                        " has feature dimension " +
                        std::to_string(inst.feature.size()) + ", expected " +
                        std::to_string(feature_dim));
    if (inst.label >= num_classes)
      throw FormatError("dataset: instance " + std::to_string(i) +
                        " has label " + std::to_string(inst.label) +
                        " >= num_classes " + std::to_string(num_classes));
    if (!all_finite(inst.feature))
      throw FormatError("dataset: instance " + std::to_string(i) +
                        " has a non-finite feature value");
  }
  if (!fine_labels.empty() && fine_labels.size() != instances.size())
    throw FormatError("dataset: fine-label provenance length mismatch");
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& inst : instances) ++counts[inst.label];
  return counts;
}

namespace {

// --- CSV ---------------------------------------------------------------

std::string expected_header(std::size_t feature_dim) {
  std::string h = "id,group,label";
  for (std::size_t i = 0; i < feature_dim; ++i)
    h += ",f" + std::to_string(i);
  return h;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::uint64_t parse_u64(const std::string& s, std::size_t row,
                        const char* what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError("csv row " + std::to_string(row) + ": bad " +
                      std::string(what) + " '" + s + "'");
  return value;
}

double parse_f64(const std::string& s, std::size_t row, std::size_t col) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value))
    throw FormatError("csv row " + std::to_string(row) + ": bad float in f" +
                      std::to_string(col));
  return value;
}

// --- DPLF binary -------------------------------------------------------

constexpr char kMagic[4] = {'D', 'P', 'L', 'F'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >>
                                           (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

void write_le_f32(std::ofstream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  write_le(out, bits);
}

template <typename T>
bool read_le(std::ifstream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    acc |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  value = static_cast<T>(acc);
  return true;
}

bool read_le_f32(std::ifstream& in, float& value) {
  std::uint32_t bits;
  if (!read_le(in, bits)) return false;
  std::memcpy(&value, &bits, sizeof(value));
  return true;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line))
    throw FormatError("csv '" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_fields(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "group" ||
      header[2] != "label")
    throw FormatError("csv '" + path + "': bad header, expected '" +
                      expected_header(1) + ",...'");
  const std::size_t feature_dim = header.size() - 3;
  for (std::size_t i = 0; i < feature_dim; ++i)
    if (header[3 + i] != "f" + std::to_string(i))
      throw FormatError("csv '" + path + "': bad header column " +
                        std::to_string(3 + i));

  Dataset ds;
  ds.feature_dim = feature_dim;
  std::size_t row = 1;  // header was row 0
  std::uint32_t max_label = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      ++row;
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != 3 + feature_dim)
      throw FormatError("csv row " + std::to_string(row) + ": expected " +
                        std::to_string(3 + feature_dim) + " fields, got " +
                        std::to_string(fields.size()));
    LabeledInstance inst;
    inst.id = parse_u64(fields[0], row, "id");
    inst.group = static_cast<std::uint32_t>(parse_u64(fields[1], row, "group"));
    inst.label = static_cast<std::uint32_t>(parse_u64(fields[2], row, "label"));
    inst.feature.resize(feature_dim);
    for (std::size_t i = 0; i < feature_dim; ++i)
      inst.feature[i] = parse_f64(fields[3 + i], row, i);
    max_label = std::max(max_label, inst.label);
    ds.instances.push_back(std::move(inst));
    ++row;
  }
  if (ds.instances.empty())
    throw FormatError("csv '" + path + "': no data rows");
  // The CSV schema carries no class count; the smallest consistent value is
  // max label + 1.
  ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot open '" + path + "' for writing");
  out << expected_header(dataset.feature_dim) << '\n';
  char buf[64];
  for (const auto& inst : dataset.instances) {
    out << inst.id << ',' << inst.group << ',' << inst.label;
    for (double x : inst.feature) {
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out)
    throw IoError("failed writing '" + path + "'");
}

Dataset load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path + "' for reading");

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("'" + path + "': bad magic, not a DPLF file");
  std::uint32_t version = 0;
  if (!read_le(in, version) || version != kVersion)
    throw FormatError("'" + path + "': unsupported DPLF version");
  std::uint64_t count = 0;
  std::uint32_t feature_dim = 0, num_classes = 0;
  if (!read_le(in, count) || !read_le(in, feature_dim) ||
      !read_le(in, num_classes))
    throw FormatError("'" + path + "': truncated DPLF header");
  if (count == 0)
    throw FormatError("'" + path + "': DPLF file holds an empty dataset");
  if (feature_dim == 0)
    throw FormatError("'" + path + "': DPLF feature_dim is zero");

  Dataset ds;
  ds.feature_dim = feature_dim;
  ds.num_classes = num_classes;
  ds.instances.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    LabeledInstance inst;
    if (!read_le(in, inst.id) || !read_le(in, inst.group) ||
        !read_le(in, inst.label))
      throw FormatError("'" + path + "': truncated DPLF record " +
                        std::to_string(r));
    if (inst.label >= num_classes)
      throw FormatError("'" + path + "': record " + std::to_string(r) +
                        " label " + std::to_string(inst.label) +
                        " >= num_classes " + std::to_string(num_classes));
    inst.feature.resize(feature_dim);
    for (std::uint32_t i = 0; i < feature_dim; ++i) {
      float f;
      if (!read_le_f32(in, f))
        throw FormatError("'" + path + "': truncated DPLF record " +
                          std::to_string(r));
      inst.feature[i] = static_cast<double>(f);
    }
    ds.instances.push_back(std::move(inst));
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw FormatError("'" + path + "': trailing bytes after last DPLF record");
  ds.validate();
  return ds;
}

void save_binary(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  write_le(out, kVersion);
  write_le(out, static_cast<std::uint64_t>(dataset.instances.size()));
  write_le(out, static_cast<std::uint32_t>(dataset.feature_dim));
  write_le(out, dataset.num_classes);
  for (const auto& inst : dataset.instances) {
    write_le(out, inst.id);
    write_le(out, inst.group);
    write_le(out, inst.label);
    for (double x : inst.feature)
      write_le_f32(out, static_cast<float>(x));
  }
  if (!out)
    throw IoError("failed writing '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe)
    throw IoError("cannot open '" + path + "' for reading");
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::memcmp(magic, kMagic, 4) == 0) return load_binary(path);
  return load_csv(path);
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
    save_csv(dataset, path);
  else
    save_binary(dataset, path);
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_frac,
                                  std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ConfigError("split: train_frac must lie strictly between 0 and 1");
  dataset.validate();

  const std::size_t n = dataset.instances.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.next_below(i + 1);
    std::swap(order[i], order[j]);
  }

  const auto train_count =
      static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  auto take = [&](std::size_t begin, std::size_t end) {
    Dataset part;
    part.num_classes = dataset.num_classes;
    part.feature_dim = dataset.feature_dim;
    part.class_names = dataset.class_names;
    part.instances.reserve(end - begin);
    const bool has_fine = !dataset.fine_labels.empty();
    for (std::size_t i = begin; i < end; ++i) {
      part.instances.push_back(dataset.instances[order[i]]);
      if (has_fine) part.fine_labels.push_back(dataset.fine_labels[order[i]]);
    }
    return part;
  };
  return {take(0, train_count), take(train_count, n)};
}

}  // namespace dpl
