// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace dpl {

namespace {

constexpr const char* kFormat = "dpl-checkpoint";
constexpr int kVersion = 1;

nlohmann::json matrix_to_json(const Matrix& m) {
  return nlohmann::json{
      {"rows", m.rows}, {"cols", m.cols}, {"values", m.values}};
}

Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.values = j.at("values").get<std::vector<double>>();
  if (m.values.size() != m.rows * m.cols)
    throw FormatError(std::string("checkpoint: ") + what +
                      " has inconsistent shape");
  if (!all_finite(m.values))
    throw FormatError(std::string("checkpoint: ") + what +
                      " holds non-finite values");
  return m;
}

Vector vector_from_json(const nlohmann::json& j, const char* what) {
  Vector v = j.get<Vector>();
  if (!all_finite(v))
    throw FormatError(std::string("checkpoint: ") + what +
                      " holds non-finite values");
  return v;
}

}  // namespace

std::string checkpoint_to_json(const ModelState& model) {
  validate_shapes(model);
  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["dims"] = {{"d_in", model.dims.d_in},
                 {"d", model.dims.d},
                 {"num_classes", model.dims.num_classes},
                 {"hidden", model.dims.hidden}};
  doc["step"] = model.step;
  doc["scales"] = {{"a", model.scales.a}, {"b", model.scales.b}};
  doc["projector"] = {{"weight", matrix_to_json(model.projector.weight)},
                      {"bias", model.projector.bias}};
  doc["prototypes"] = matrix_to_json(model.prototypes.c);
  doc["variance_net"] = {{"sigma2_floor", model.variance_net.sigma2_floor},
                         {"w1", matrix_to_json(model.variance_net.w1)},
                         {"b1", model.variance_net.b1},
                         {"w2", matrix_to_json(model.variance_net.w2)},
                         {"b2", model.variance_net.b2}};
  return doc.dump(2);
}

ModelState checkpoint_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    if (doc.value("format", "") != kFormat)
      throw FormatError("checkpoint: not a dpl checkpoint document");
    if (doc.value("version", -1) != kVersion)
      throw FormatError("checkpoint: unsupported version");

    ModelState model;
    const auto& dims = doc.at("dims");
    model.dims.d_in = dims.at("d_in").get<std::size_t>();
    model.dims.d = dims.at("d").get<std::size_t>();
    model.dims.num_classes = dims.at("num_classes").get<std::size_t>();
    model.dims.hidden = dims.at("hidden").get<std::size_t>();
    model.step = doc.at("step").get<std::uint64_t>();
    model.scales.a = doc.at("scales").at("a").get<double>();
    model.scales.b = doc.at("scales").at("b").get<double>();
    model.projector.weight =
        matrix_from_json(doc.at("projector").at("weight"), "projector weight");
    model.projector.bias =
        vector_from_json(doc.at("projector").at("bias"), "projector bias");
    model.prototypes.c = matrix_from_json(doc.at("prototypes"), "prototypes");
    const auto& vn = doc.at("variance_net");
    model.variance_net.sigma2_floor = vn.at("sigma2_floor").get<double>();
    model.variance_net.w1 = matrix_from_json(vn.at("w1"), "variance net w1");
    model.variance_net.b1 = vector_from_json(vn.at("b1"), "variance net b1");
    model.variance_net.w2 = matrix_from_json(vn.at("w2"), "variance net w2");
    model.variance_net.b2 = vector_from_json(vn.at("b2"), "variance net b2");

    try {
      validate_shapes(model);
    } catch (const DimensionError& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }
    if (!std::isfinite(model.scales.a) || !std::isfinite(model.scales.b))
      throw FormatError("checkpoint: non-finite scale parameters");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: missing or bad field: ") +
                      e.what());
  }
}

void save_checkpoint(const ModelState& model, const std::string& path) {
  const std::string text = checkpoint_to_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open '" + path + "' for writing");
  out << text << '\n';
  if (!out)
    throw IoError("failed writing '" + path + "'");
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace dpl
