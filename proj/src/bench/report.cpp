#include "bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "common/error.hpp"
#include "json.hpp"

namespace divseg::bench {

using nlohmann::json;

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

// Column-wise best markers over already formatted cells; ties all get a star.
void star_best(std::vector<std::vector<std::string>>& cells, std::size_t first_numeric) {
  if (cells.size() < 2) return;
  const std::size_t cols = cells.front().size();
  for (std::size_t c = first_numeric; c < cols; ++c) {
    double best = -1.0;
    for (const auto& row : cells) best = std::max(best, std::stod(row[c]));
    for (auto& row : cells) {
      if (std::stod(row[c]) == best) row[c] += "*";
    }
  }
}

std::string render(const std::vector<std::string>& header, std::vector<std::vector<std::string>> body,
                   TableFormat format, std::size_t first_numeric, bool star) {
  std::string out;
  if (format == TableFormat::Csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += csv_cell(cells[i]);
      }
      out += '\n';
    };
    line(header);
    for (const auto& row : body) line(row);
    return out;
  }
  if (star) star_best(body, first_numeric);
  auto line = [&](const std::vector<std::string>& cells) {
    out += '|';
    for (const auto& c : cells) out += ' ' + c + " |";
    out += '\n';
  };
  line(header);
  out += '|';
  for (std::size_t i = 0; i < header.size(); ++i) out += i < first_numeric ? "---|" : "---:|";
  out += '\n';
  for (const auto& row : body) line(row);
  return out;
}

json rows_json(const DiceReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"subset", row.subset},
                    {"mask", row.mask_bits},
                    {"dsc", row.dsc},
                    {"empty_regions", row.empty_regions}});
  }
  return {{"method", r.method}, {"rows", rows}};
}

DiceReport rows_from(const json& j) {
  DiceReport r;
  r.method = j.at("method").get<std::string>();
  const auto& subsets = net::canonical_subsets();
  const auto& rows = j.at("rows");
  if (rows.size() != subsets.size()) throw ParseError("report: expected 15 subset rows");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    SubsetRow row;
    row.subset = rows[k].at("subset").get<std::string>();
    row.mask_bits = rows[k].at("mask").get<unsigned>();
    row.dsc = rows[k].at("dsc").get<std::array<double, kRegions>>();
    row.empty_regions = rows[k].at("empty_regions").get<std::size_t>();
    if (row.mask_bits != subsets[k].bits() || row.subset != subsets[k].label()) {
      throw ParseError("report: row " + std::to_string(k) + " is not in canonical subset order");
    }
    for (double v : row.dsc) {
      if (!(v >= 0.0 && v <= 1.0)) throw ParseError("report: DSC outside [0,1] in row " + row.subset);
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

template <class F>
auto parse_json(const std::string& text, F&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("report json: ") + e.what());
  }
}

}  // namespace

TableFormat parse_format(std::string_view s) {
  if (s == "csv") return TableFormat::Csv;
  if (s == "markdown" || s == "md") return TableFormat::Markdown;
  throw ConfigError("unknown format '" + std::string(s) + "' (expected csv or markdown)");
}

std::string file_extension(TableFormat f) { return f == TableFormat::Csv ? "csv" : "md"; }

std::string format_percent(double dsc) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", dsc * 100.0);
  return buf;
}

std::string emit_table(const DiceReport& report, TableFormat format) {
  std::vector<std::vector<std::string>> body;
  for (const auto& row : report.rows) {
    body.push_back({row.subset, format_percent(row.dsc[0]), format_percent(row.dsc[1]),
                    format_percent(row.dsc[2])});
  }
  const auto avg = report.region_average();
  body.push_back({"avg", format_percent(avg[0]), format_percent(avg[1]), format_percent(avg[2])});
  return render({"subset", "WT", "TC", "ET"}, std::move(body), format, 1, false);
}

std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::DivergenceFamily: return "divergence_family";
    case AblationAxis::AlphaSweep: return "alpha_sweep";
    case AblationAxis::LossComponents: return "loss_components";
  }
  return "?";
}

AblationAxis parse_axis(std::string_view s) {
  for (auto a : {AblationAxis::DivergenceFamily, AblationAxis::AlphaSweep, AblationAxis::LossComponents}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown ablation axis '" + std::string(s) + "'");
}

std::string divergence_title(div::Divergence d) {
  using div::Divergence;
  switch (d) {
    case Divergence::TotalVariation: return "Total Variation";
    case Divergence::SquaredHellinger: return "Squared Hellinger";
    case Divergence::KullbackLeibler: return "Kullback-Leibler";
    case Divergence::NeymanChi2: return "Neyman χ²";
    case Divergence::JensenShannon: return "Jensen-Shannon";
    case Divergence::Holder: return "Hölder";
  }
  return "?";
}

std::string emit_comparison(const ComparisonReport& report, TableFormat format) {
  const bool md = format == TableFormat::Markdown;
  std::vector<std::string> header;
  std::size_t first_numeric = 1;
  switch (report.axis) {
    case AblationAxis::DivergenceFamily:
      header = {"method", "WT", "TC", "ET", "Avg"};
      break;
    case AblationAxis::AlphaSweep:
      header = {"divergence", "alpha", "WT", "TC", "ET", "Avg"};
      first_numeric = 2;
      break;
    case AblationAxis::LossComponents:
      header = {"dice", "mi", "hd", "3", "2", "1", "0", "Avg"};
      first_numeric = 3;
      break;
  }
  std::vector<std::vector<std::string>> body;
  for (const auto& v : report.rows) {
    std::vector<std::string> cells;
    const auto avg = v.report.region_average();
    switch (report.axis) {
      case AblationAxis::DivergenceFamily:
        cells = {divergence_title(v.divergence)};
        break;
      case AblationAxis::AlphaSweep: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v.alpha);
        cells = {divergence_title(v.divergence), buf};
        break;
      }
      case AblationAxis::LossComponents: {
        const std::string on = md ? "✓" : "1";
        const std::string off = md ? "×" : "0";
        cells = {on, v.use_mi ? on : off, v.use_hd ? on : off};
        for (double g : v.report.by_missing_count()) cells.push_back(format_percent(g));
        break;
      }
    }
    if (report.axis != AblationAxis::LossComponents) {
      for (double a : avg) cells.push_back(format_percent(a));
    }
    cells.push_back(format_percent(v.report.grand_average()));
    body.push_back(std::move(cells));
  }
  return render(header, std::move(body), format, first_numeric, true);
}

std::string report_to_json(const DiceReport& r) {
  json j = rows_json(r);
  j["kind"] = "subsets";
  return j.dump(2) + "\n";
}

DiceReport report_from_json(const std::string& text) {
  return parse_json(text, [](const json& j) {
    if (j.at("kind") != "subsets") throw ParseError("report json: not a subset report");
    return rows_from(j);
  });
}

std::string comparison_to_json(const ComparisonReport& r) {
  json variants = json::array();
  for (const auto& v : r.rows) {
    variants.push_back({{"label", v.label},
                        {"divergence", div::to_string(v.divergence)},
                        {"alpha", v.alpha},
                        {"mi", v.use_mi},
                        {"hd", v.use_hd},
                        {"report", rows_json(v.report)}});
  }
  json j = {{"kind", "comparison"}, {"axis", to_string(r.axis)}, {"variants", variants}};
  return j.dump(2) + "\n";
}

ComparisonReport comparison_from_json(const std::string& text) {
  return parse_json(text, [](const json& j) {
    if (j.at("kind") != "comparison") throw ParseError("report json: not a comparison report");
    ComparisonReport r;
    try {
      r.axis = parse_axis(j.at("axis").get<std::string>());
    } catch (const ConfigError& e) {
      throw ParseError(e.what());
    }
    for (const auto& v : j.at("variants")) {
      VariantResult vr;
      vr.label = v.at("label").get<std::string>();
      try {
        vr.divergence = div::parse_divergence(v.at("divergence").get<std::string>());
      } catch (const ConfigError& e) {
        throw ParseError(e.what());
      }
      vr.alpha = v.at("alpha").get<double>();
      vr.use_mi = v.at("mi").get<bool>();
      vr.use_hd = v.at("hd").get<bool>();
      vr.report = rows_from(v.at("report"));
      r.rows.push_back(std::move(vr));
    }
    return r;
  });
}

std::string saved_report_kind(const std::string& json_text) {
  const std::string kind =
      parse_json(json_text, [](const json& j) { return j.at("kind").get<std::string>(); });
  if (kind != "subsets" && kind != "comparison") {
    throw ParseError("report json: unknown kind '" + kind + "'");
  }
  return kind;
}

std::string emit_saved_report(const std::string& json_text, TableFormat format) {
  if (saved_report_kind(json_text) == "subsets") return emit_table(report_from_json(json_text), format);
  return emit_comparison(comparison_from_json(json_text), format);
}

}  // namespace divseg::bench
