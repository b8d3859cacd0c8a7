#include "segrobust/harness/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace segrobust {

using nlohmann::json;

namespace {

json record_json(const EvalRecord& r) {
  return {{"image_id", r.image_id}, {"condition", r.condition},   {"pa_fg", r.pa_fg},
          {"pa_bg", r.pa_bg},       {"iou_fg", r.iou_fg},         {"iou_bg", r.iou_bg},
          {"mpa", r.mpa},           {"miou", r.miou},             {"pa_mask_index", r.pa_mask_index},
          {"iou_mask_index", r.iou_mask_index}};
}

EvalRecord record_from(const json& j) {
  EvalRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.condition = j.at("condition").get<std::string>();
  r.pa_fg = j.at("pa_fg").get<double>();
  r.pa_bg = j.at("pa_bg").get<double>();
  r.iou_fg = j.at("iou_fg").get<double>();
  r.iou_bg = j.at("iou_bg").get<double>();
  r.mpa = j.at("mpa").get<double>();
  r.miou = j.at("miou").get<double>();
  r.pa_mask_index = j.at("pa_mask_index").get<long>();
  r.iou_mask_index = j.at("iou_mask_index").get<long>();
  return r;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string to_canonical_json(const ReportBundle& bundle) {
  json j;
  j["aggregates"] = json::array();
  for (const auto& r : bundle.aggregates) j["aggregates"].push_back(record_json(r));
  j["rows"] = json::array();
  for (const auto& r : bundle.rows) j["rows"].push_back(record_json(r));
  j["skips"] = json::array();
  for (const auto& s : bundle.skips) j["skips"].push_back({{"image_id", s.image_id}, {"reason", s.reason}});
  j["point_misses"] = bundle.point_misses;
  const auto& p = bundle.provenance;
  j["provenance"] = {{"master_seed", p.master_seed}, {"config_hash", p.config_hash},
                     {"code_version", p.code_version}, {"model", p.model},
                     {"split", p.split},               {"conditions", p.conditions},
                     {"image_seeds", p.image_seeds}};
  return j.dump(2) + "\n";
}

ReportBundle report_from_json(const std::string& text) {
  ReportBundle b;
  try {
    const json j = json::parse(text);
    for (const auto& r : j.at("aggregates")) b.aggregates.push_back(record_from(r));
    for (const auto& r : j.at("rows")) b.rows.push_back(record_from(r));
    for (const auto& s : j.at("skips"))
      b.skips.push_back({s.at("image_id").get<std::string>(), s.at("reason").get<std::string>()});
    b.point_misses = j.at("point_misses").get<std::map<std::string, std::size_t>>();
    const auto& p = j.at("provenance");
    b.provenance.master_seed = p.at("master_seed").get<std::uint64_t>();
    b.provenance.config_hash = p.at("config_hash").get<std::string>();
    b.provenance.code_version = p.at("code_version").get<std::string>();
    b.provenance.model = p.at("model").get<std::string>();
    b.provenance.split = p.at("split").get<std::string>();
    b.provenance.conditions = p.at("conditions").get<std::vector<std::string>>();
    b.provenance.image_seeds = p.at("image_seeds").get<std::map<std::string, std::uint64_t>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  b.verify();
  return b;
}

ReportBundle load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("cannot open report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

std::string to_csv(const ReportBundle& bundle) {
  std::string out = "condition,mpa,miou,pa_bg,pa_fg,iou_bg,iou_fg\n";
  for (const auto& r : bundle.aggregates)
    out += csv_field(r.condition) + "," + shortest(r.mpa) + "," + shortest(r.miou) + "," + shortest(r.pa_bg) + "," +
           shortest(r.pa_fg) + "," + shortest(r.iou_bg) + "," + shortest(r.iou_fg) + "\n";
  return out;
}

void emit_report(const ReportBundle& bundle, const std::filesystem::path& dir,
                 const std::vector<std::string>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& f : formats) {
    if (f == "json")
      write_text(dir / "report.json", to_canonical_json(bundle));
    else if (f == "csv")
      write_text(dir / "report.csv", to_csv(bundle));
    else
      throw ConfigInvalid("unknown report format '" + f + "'");
  }
}

}  // namespace segrobust
