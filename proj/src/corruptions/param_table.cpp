#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "segrobust/corruptions/corruptions.hpp"
#include "corruption_params_data.hpp"

namespace segrobust {

namespace {

struct Requirement {
  CorruptionKind kind;
  std::vector<std::string> params;
};

const std::vector<Requirement>& requirements() {
  static const std::vector<Requirement> reqs = {
      {CorruptionKind::GaussianNoise, {"sigma"}},
      {CorruptionKind::ShotNoise, {"lambda"}},
      {CorruptionKind::ImpulseNoise, {"amount"}},
      {CorruptionKind::DefocusBlur, {"radius", "alias_sigma"}},
      {CorruptionKind::GlassBlur, {"sigma", "max_delta", "iterations"}},
      {CorruptionKind::MotionBlur, {"radius", "sigma"}},
      {CorruptionKind::ZoomBlur, {"zoom_max", "zoom_step"}},
      {CorruptionKind::Snow, {"loc", "scale", "zoom", "threshold", "blur_radius", "blur_sigma", "blend"}},
      {CorruptionKind::Frost, {"image_weight", "frost_weight"}},
      {CorruptionKind::Fog, {"scale", "decay"}},
      {CorruptionKind::Brightness, {"shift"}},
      {CorruptionKind::Contrast, {"factor"}},
      {CorruptionKind::Elastic, {"alpha", "sigma"}},
      {CorruptionKind::Pixelate, {"block"}},
      {CorruptionKind::Jpeg, {"quality"}},
  };
  return reqs;
}

// +1: non-decreasing with severity, -1: non-increasing.
struct Direction {
  CorruptionKind kind;
  const char* param;
  int sign;
};

constexpr Direction kDirections[] = {
    {CorruptionKind::GaussianNoise, "sigma", +1},   {CorruptionKind::ShotNoise, "lambda", -1},
    {CorruptionKind::ImpulseNoise, "amount", +1},   {CorruptionKind::DefocusBlur, "radius", +1},
    {CorruptionKind::GlassBlur, "sigma", +1},       {CorruptionKind::MotionBlur, "radius", +1},
    {CorruptionKind::MotionBlur, "sigma", +1},      {CorruptionKind::ZoomBlur, "zoom_max", +1},
    {CorruptionKind::Frost, "frost_weight", +1},    {CorruptionKind::Frost, "image_weight", -1},
    {CorruptionKind::Fog, "scale", +1},             {CorruptionKind::Brightness, "shift", +1},
    {CorruptionKind::Contrast, "factor", -1},       {CorruptionKind::Pixelate, "block", +1},
    {CorruptionKind::Jpeg, "quality", -1},
};

}  // namespace

CorruptionParamTable CorruptionParamTable::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("corruption table: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("corruption table: expected an object");
  CorruptionParamTable table;
  for (const auto& [key, node] : doc.items()) {
    if (key == "version") {
      if (!node.is_number_integer()) throw ParseError("corruption table: version must be an integer");
      table.version_ = node.get<int>();
      continue;
    }
    const auto kind = corruption_kind_from_string(key);
    if (!node.is_object()) throw ParseError("corruption table: " + key + " must be an object");
    for (const auto& [sev, params] : node.items()) {
      int s = 0;
      try {
        s = std::stoi(sev);
      } catch (...) {
        throw ParseError("corruption table: " + key + " has non-numeric severity '" + sev + "'");
      }
      if (s < 1 || s > 5) throw SeverityOutOfRange("corruption table: " + key + " severity " + sev);
      Params p;
      for (const auto& [name, value] : params.items()) {
        if (!value.is_number()) throw ParseError("corruption table: " + key + "." + sev + "." + name + " is not a number");
        p[name] = value.get<double>();
      }
      table.cells_[kind][s - 1] = std::move(p);
      table.present_[kind][s - 1] = true;
    }
  }
  table.validate();
  return table;
}

CorruptionParamTable CorruptionParamTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("corruption table not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

const CorruptionParamTable& CorruptionParamTable::builtin() {
  static const CorruptionParamTable table = from_json(kCorruptionParamsJson);
  return table;
}

void CorruptionParamTable::validate() const {
  if (version_ != 1) throw ConfigInvalid("corruption table: unsupported version " + std::to_string(version_));
  for (const auto& req : requirements()) {
    const auto it = present_.find(req.kind);
    for (int s = 0; s < 5; ++s) {
      if (it == present_.end() || !it->second[s])
        throw ConfigInvalid(std::string("corruption table: missing ") + to_string(req.kind) + " severity " +
                            std::to_string(s + 1));
      const auto& cell = cells_.at(req.kind)[s];
      for (const auto& name : req.params) {
        const auto p = cell.find(name);
        if (p == cell.end())
          throw ConfigInvalid(std::string("corruption table: ") + to_string(req.kind) + " severity " +
                              std::to_string(s + 1) + " lacks '" + name + "'");
      }
      for (const auto& [name, v] : cell)
        if (!std::isfinite(v)) throw ConfigInvalid(std::string("corruption table: non-finite ") + name);
    }
  }
  for (const auto& d : kDirections)
    for (int s = 1; s < 5; ++s) {
      const double prev = cells_.at(d.kind)[s - 1].at(d.param), cur = cells_.at(d.kind)[s].at(d.param);
      if (d.sign * (cur - prev) < 0)
        throw ConfigInvalid(std::string("corruption table: ") + to_string(d.kind) + "." + d.param +
                            " is not monotone in severity");
    }
}

const CorruptionParamTable::Params& CorruptionParamTable::at(CorruptionKind kind, int severity) const {
  if (severity < 1 || severity > 5) throw SeverityOutOfRange("severity " + std::to_string(severity));
  const auto it = cells_.find(kind);
  if (it == cells_.end()) throw UnknownKind(std::string("no parameters for ") + to_string(kind));
  return it->second[severity - 1];
}

double CorruptionParamTable::param(CorruptionKind kind, int severity, const std::string& name) const {
  const auto& p = at(kind, severity);
  const auto it = p.find(name);
  if (it == p.end()) throw ConfigInvalid(std::string(to_string(kind)) + " has no parameter '" + name + "'");
  return it->second;
}

}  // namespace segrobust
