#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bench/evaluate.hpp"
#include "divergences/divergence.hpp"

namespace divseg::bench {

enum class TableFormat { Csv, Markdown };

TableFormat parse_format(std::string_view s);
std::string file_extension(TableFormat f);  // "csv" or "md"

// DSC in [0,1] as a percentage with one decimal.
std::string format_percent(double dsc);

// subset,WT,TC,ET then an avg row.
std::string emit_table(const DiceReport& report, TableFormat format);

enum class AblationAxis { DivergenceFamily, AlphaSweep, LossComponents };

std::string to_string(AblationAxis a);
AblationAxis parse_axis(std::string_view s);

struct VariantResult {
  std::string label;
  div::Divergence divergence = div::Divergence::Holder;
  double alpha = 1.1;
  bool use_mi = true;
  bool use_hd = true;
  DiceReport report;
};

struct ComparisonReport {
  AblationAxis axis = AblationAxis::LossComponents;
  std::vector<VariantResult> rows;
};

// Display name used in the divergence-family table, e.g. "Kullback-Leibler".
std::string divergence_title(div::Divergence d);

// Layout follows the axis: method/WT/TC/ET/Avg, divergence/alpha/WT/TC/ET/Avg,
// or dice/mi/hd/3/2/1/0/Avg. Markdown stars the best value in each column.
std::string emit_comparison(const ComparisonReport& report, TableFormat format);

std::string report_to_json(const DiceReport& r);
DiceReport report_from_json(const std::string& text);
std::string comparison_to_json(const ComparisonReport& r);
ComparisonReport comparison_from_json(const std::string& text);

// "subsets" or "comparison"; ParseError for anything else.
std::string saved_report_kind(const std::string& json_text);

// Re-emits a saved report of either kind.
std::string emit_saved_report(const std::string& json_text, TableFormat format);

}  // namespace divseg::bench
