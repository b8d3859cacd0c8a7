#include "segrobust/harness/conditions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace segrobust {

using nlohmann::json;

const char* to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::Off: return "off";
    case SplitMode::Big: return "big";
    case SplitMode::Small: return "small";
  }
  return "off";
}

SplitMode split_mode_from_string(const std::string& s) {
  if (s == "off") return SplitMode::Off;
  if (s == "big" || s == "big_top_half") return SplitMode::Big;
  if (s == "small" || s == "small_bottom_half") return SplitMode::Small;
  throw UnknownKind("unknown split mode '" + s + "'");
}

std::vector<std::size_t> big_small_filter(const std::vector<Index>& areas, SplitMode mode) {
  std::vector<std::size_t> order(areas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == SplitMode::Off) return order;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return areas[a] > areas[b]; });
  const std::size_t big = (areas.size() + 1) / 2;
  if (mode == SplitMode::Big) return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(big)};
  return {order.begin() + static_cast<std::ptrdiff_t>(big), order.end()};
}

std::vector<std::size_t> big_small_filter(const AnnotatedImage& record, SplitMode mode) {
  std::vector<Index> areas;
  areas.reserve(record.annotations.size());
  for (const auto& a : record.annotations) areas.push_back(a.area);
  return big_small_filter(areas, mode);
}

Condition Condition::clean() { return {}; }

Condition Condition::corrupted(CorruptionKind kind, int severity) {
  Condition c;
  c.type = Type::Corruption;
  c.corruption = kind;
  c.severity = severity;
  return c;
}

Condition Condition::attacked(const AttackConfig& config, bool quantize) {
  Condition c;
  c.type = Type::Attack;
  c.attack = config;
  c.quantize = quantize;
  return c;
}

std::string epsilon_label(double epsilon) {
  // Snap away representation noise such as 8/255*255 = 7.999999999999999.
  const double units = std::round(epsilon * 255.0 * 1e9) / 1e9;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, units);
  return std::string(buf, res.ptr) + "/255";
}

std::string Condition::tag() const {
  switch (type) {
    case Type::Clean:
      return "clean";
    case Type::Corruption:
      return std::string("corruption:") + to_string(corruption) + ":" + std::to_string(severity);
    case Type::Attack: {
      std::string t = std::string("attack:") + to_string(attack.method) + ":" + epsilon_label(attack.epsilon) +
                      ":" + to_string(attack.loss.kind);
      const AttackConfig d = AttackConfig::defaults(attack.method, attack.epsilon);
      if (attack.steps != d.steps) t += ":k" + std::to_string(attack.steps);
      if (attack.method != AttackMethod::Fgsm && attack.step_size != d.step_size)
        t += ":step" + epsilon_label(attack.step_size);
      if (attack.loss.segpgd_weighting != d.loss.segpgd_weighting)
        t += attack.loss.segpgd_weighting ? ":weighted" : ":unweighted";
      if (attack.fix_target_head) t += ":fixed_head";
      if (quantize) t += ":q8";
      return t;
    }
  }
  return "clean";
}

void Condition::validate() const {
  if (type == Type::Corruption) CorruptionSpec{corruption, severity, 0}.validate();
  if (type == Type::Attack) attack.validate();
}

namespace {

template <typename T, typename Parse>
std::vector<T> list_or_all(const json& j, const std::vector<T>& all, Parse parse, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "all") return all;
    return {parse(j)};
  }
  if (!j.is_array()) throw ParseError(where + ": expected \"all\" or a list");
  std::vector<T> out;
  for (const auto& e : j) {
    if (e.is_string() && e.get<std::string>() == "all") return all;
    out.push_back(parse(e));
  }
  return out;
}

std::vector<Condition> parse_conditions(const json& root) {
  if (!root.is_object()) throw ParseError("conditions: expected a JSON object");
  std::vector<Condition> out;
  if (root.value("clean", true)) out.push_back(Condition::clean());

  const std::vector<CorruptionKind> all_kinds(kAllCorruptions.begin(), kAllCorruptions.end());
  const std::vector<int> all_severities = {1, 2, 3, 4, 5};
  for (const auto& grid : root.value("corruptions", json::array())) {
    const auto kinds = list_or_all<CorruptionKind>(
        grid.at("kinds"), all_kinds,
        [](const json& e) { return corruption_kind_from_string(e.get<std::string>()); }, "corruptions.kinds");
    const auto severities = list_or_all<int>(
        grid.value("severities", json("all")), all_severities, [](const json& e) { return e.get<int>(); },
        "corruptions.severities");
    for (auto k : kinds)
      for (int s : severities) out.push_back(Condition::corrupted(k, s));
  }

  for (const auto& grid : root.value("attacks", json::array())) {
    std::vector<AttackMethod> methods;
    for (const auto& m : grid.at("methods")) methods.push_back(attack_method_from_string(m.get<std::string>()));
    std::vector<double> eps;
    if (grid.contains("eps")) {
      for (const auto& e : grid.at("eps")) eps.push_back(e.get<double>() / 255.0);
    } else {
      eps.assign(kDefaultEpsilonLadder.begin(), kDefaultEpsilonLadder.end());
    }
    const bool quantize = grid.value("quantize", false);
    for (auto m : methods)
      for (double e : eps) {
        AttackConfig c = AttackConfig::defaults(m, e);
        c.loss.kind = loss_kind_from_string(grid.value("loss", std::string("focal_dice")));
        if (m != AttackMethod::Fgsm) {
          c.steps = grid.value("steps", c.steps);
          c.step_size = grid.value("step_size", 1.0) / 255.0;
        }
        c.loss.segpgd_weighting = grid.value("segpgd_weighting", c.loss.segpgd_weighting);
        c.fix_target_head = grid.value("fix_target_head", false);
        out.push_back(Condition::attacked(c, quantize));
      }
  }
  for (const auto& c : out) c.validate();
  if (out.empty()) throw ConfigInvalid("conditions: at least one condition is required");
  return out;
}

}  // namespace

std::vector<Condition> conditions_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("conditions: ") + e.what());
  }
  try {
    return parse_conditions(root);
  } catch (const json::exception& e) {
    throw ParseError(std::string("conditions: ") + e.what());
  }
}

std::vector<Condition> load_conditions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open conditions file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return conditions_from_json(ss.str());
}

std::vector<Condition> full_corruption_grid() {
  std::vector<Condition> out = {Condition::clean()};
  for (auto k : kAllCorruptions)
    for (int s = 1; s <= 5; ++s) out.push_back(Condition::corrupted(k, s));
  return out;
}

}  // namespace segrobust
