#ifndef SEGROBUST_HARNESS_REPORT_HPP
#define SEGROBUST_HARNESS_REPORT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "segrobust/harness/evaluate.hpp"

namespace segrobust {

inline constexpr const char* kCodeVersion = "segrobust 0.1.0";

// Sorted keys, shortest round-trip floats, two-space indent, trailing newline.
std::string to_canonical_json(const ReportBundle& bundle);
// Parses and re-verifies the aggregates.
ReportBundle report_from_json(const std::string& text);
ReportBundle load_report(const std::filesystem::path& path);

// condition,mpa,miou,pa_bg,pa_fg,iou_bg,iou_fg; one row per aggregate.
std::string to_csv(const ReportBundle& bundle);

// Writes report.json and/or report.csv into `dir`.
void emit_report(const ReportBundle& bundle, const std::filesystem::path& dir,
                 const std::vector<std::string>& formats);

// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace segrobust

#endif  // SEGROBUST_HARNESS_REPORT_HPP
