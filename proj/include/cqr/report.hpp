#ifndef CQR_REPORT_HPP
#define CQR_REPORT_HPP

// Experiment report model and its CSV / JSON renderings. JSON uses insertion-ordered
// objects and shortest round-trip number formatting, so identical reports serialise to
// identical bytes. Non-finite numbers are written as the strings "inf", "-inf", "nan".

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqr/types.hpp"

namespace cqr {

struct RepetitionRow {
  std::string method;
  int repetition = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double avg_length = 0.0;
  double coverage = 0.0;
  double tail_lo_miss = 0.0;
  double tail_hi_miss = 0.0;
  std::size_t n_test = 0;
  std::size_t n_cal = 0;
  double correction_lo = 0.0;
  double correction_hi = 0.0;
  double level_lo = 0.0;
  double level_hi = 0.0;
  std::size_t crossings = 0;
  std::size_t collapsed = 0;
  double wall_seconds = 0.0;

  friend bool operator==(const RepetitionRow&, const RepetitionRow&) = default;
};

struct MethodSummary {
  std::string method;
  double avg_length = 0.0;
  double sd_length = 0.0;
  double avg_coverage = 0.0;
  double sd_coverage = 0.0;
  double tail_lo_miss = 0.0;
  double tail_hi_miss = 0.0;
  int n_reps = 0;
  int n_failed = 0;
  std::size_t crossings = 0;
  std::size_t collapsed = 0;
  double wall_seconds = 0.0;

  friend bool operator==(const MethodSummary&, const MethodSummary&) = default;
};

struct ReportMeta {
  std::string dataset;
  std::string engine;
  double alpha = 0.1;
  int n_repetitions = 0;
  double gamma = 1.0;
  std::uint64_t seed = 0;
  bool tune_quantiles = false;
  std::string units = "standardized";

  friend bool operator==(const ReportMeta&, const ReportMeta&) = default;
};

struct ExperimentReport {
  ReportMeta meta;
  std::vector<MethodSummary> methods;
  std::vector<RepetitionRow> rows;

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline const char* csv_header() {
  return "method,avg_length,sd_length,avg_coverage,sd_coverage,tail_lo_miss,tail_hi_miss,n_reps";
}

inline std::string to_csv(const ExperimentReport& report) {
  std::string out = csv_header();
  out += '\n';
  for (const auto& m : report.methods) {
    out += m.method;
    for (double v : {m.avg_length, m.sd_length, m.avg_coverage, m.sd_coverage, m.tail_lo_miss, m.tail_hi_miss}) {
      out += ',';
      out += format_number(v);
    }
    out += ',' + std::to_string(m.n_reps) + '\n';
  }
  return out;
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

inline double read_number(const ojson& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw Error(ErrorCode::parse_error, "bad number in report: " + s);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ExperimentReport& r, bool include_timings = false) {
  using detail::number;
  detail::ojson j;
  j["meta"] = {{"dataset", r.meta.dataset},     {"engine", r.meta.engine},
               {"alpha", number(r.meta.alpha)}, {"n_repetitions", r.meta.n_repetitions},
               {"gamma", number(r.meta.gamma)}, {"seed", r.meta.seed},
               {"tune_quantiles", r.meta.tune_quantiles}, {"units", r.meta.units}};
  j["methods"] = detail::ojson::array();
  for (const auto& m : r.methods) {
    detail::ojson o = {{"method", m.method},
                       {"avg_length", number(m.avg_length)},
                       {"sd_length", number(m.sd_length)},
                       {"avg_coverage", number(m.avg_coverage)},
                       {"sd_coverage", number(m.sd_coverage)},
                       {"tail_lo_miss", number(m.tail_lo_miss)},
                       {"tail_hi_miss", number(m.tail_hi_miss)},
                       {"n_reps", m.n_reps},
                       {"n_failed", m.n_failed},
                       {"crossings", m.crossings},
                       {"collapsed", m.collapsed}};
    if (include_timings) o["wall_seconds"] = number(m.wall_seconds);
    j["methods"].push_back(std::move(o));
  }
  j["repetitions"] = detail::ojson::array();
  for (const auto& row : r.rows) {
    detail::ojson o = {{"method", row.method},
                       {"repetition", row.repetition},
                       {"seed", row.seed},
                       {"ok", row.ok},
                       {"error", row.error},
                       {"avg_length", number(row.avg_length)},
                       {"coverage", number(row.coverage)},
                       {"tail_lo_miss", number(row.tail_lo_miss)},
                       {"tail_hi_miss", number(row.tail_hi_miss)},
                       {"n_test", row.n_test},
                       {"n_cal", row.n_cal},
                       {"correction_lo", number(row.correction_lo)},
                       {"correction_hi", number(row.correction_hi)},
                       {"level_lo", number(row.level_lo)},
                       {"level_hi", number(row.level_hi)},
                       {"crossings", row.crossings},
                       {"collapsed", row.collapsed}};
    if (include_timings) o["wall_seconds"] = number(row.wall_seconds);
    j["repetitions"].push_back(std::move(o));
  }
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::ordered_json& j) {
  using detail::read_number;
  ExperimentReport r;
  try {
    const auto& m = j.at("meta");
    r.meta.dataset = m.at("dataset").get<std::string>();
    r.meta.engine = m.at("engine").get<std::string>();
    r.meta.alpha = read_number(m.at("alpha"));
    r.meta.n_repetitions = m.at("n_repetitions").get<int>();
    r.meta.gamma = read_number(m.at("gamma"));
    r.meta.seed = m.at("seed").get<std::uint64_t>();
    r.meta.tune_quantiles = m.at("tune_quantiles").get<bool>();
    r.meta.units = m.at("units").get<std::string>();
    for (const auto& o : j.at("methods")) {
      MethodSummary s;
      s.method = o.at("method").get<std::string>();
      s.avg_length = read_number(o.at("avg_length"));
      s.sd_length = read_number(o.at("sd_length"));
      s.avg_coverage = read_number(o.at("avg_coverage"));
      s.sd_coverage = read_number(o.at("sd_coverage"));
      s.tail_lo_miss = read_number(o.at("tail_lo_miss"));
      s.tail_hi_miss = read_number(o.at("tail_hi_miss"));
      s.n_reps = o.at("n_reps").get<int>();
      s.n_failed = o.at("n_failed").get<int>();
      s.crossings = o.at("crossings").get<std::size_t>();
      s.collapsed = o.at("collapsed").get<std::size_t>();
      if (o.contains("wall_seconds")) s.wall_seconds = read_number(o.at("wall_seconds"));
      r.methods.push_back(std::move(s));
    }
    for (const auto& o : j.at("repetitions")) {
      RepetitionRow row;
      row.method = o.at("method").get<std::string>();
      row.repetition = o.at("repetition").get<int>();
      row.seed = o.at("seed").get<std::uint64_t>();
      row.ok = o.at("ok").get<bool>();
      row.error = o.at("error").get<std::string>();
      row.avg_length = read_number(o.at("avg_length"));
      row.coverage = read_number(o.at("coverage"));
      row.tail_lo_miss = read_number(o.at("tail_lo_miss"));
      row.tail_hi_miss = read_number(o.at("tail_hi_miss"));
      row.n_test = o.at("n_test").get<std::size_t>();
      row.n_cal = o.at("n_cal").get<std::size_t>();
      row.correction_lo = read_number(o.at("correction_lo"));
      row.correction_hi = read_number(o.at("correction_hi"));
      row.level_lo = read_number(o.at("level_lo"));
      row.level_hi = read_number(o.at("level_hi"));
      row.crossings = o.at("crossings").get<std::size_t>();
      row.collapsed = o.at("collapsed").get<std::size_t>();
      if (o.contains("wall_seconds")) row.wall_seconds = read_number(o.at("wall_seconds"));
      r.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed report: ") + e.what());
  }
  return r;
}

inline std::string to_json_text(const ExperimentReport& r, bool include_timings = false) {
  return to_json(r, include_timings).dump(2) + "\n";
}

enum class ReportFormat { csv, json };

/// Format from the file extension: ".json" gives JSON, anything else CSV.
inline ReportFormat format_for_path(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0 ? ReportFormat::json : ReportFormat::csv;
}

inline void emit_report(const ExperimentReport& report, const std::string& path, ReportFormat format,
                        bool include_timings = false) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::unwritable_path, "cannot write report: " + path);
  out << (format == ReportFormat::json ? to_json_text(report, include_timings) : to_csv(report));
  if (!out) throw Error(ErrorCode::unwritable_path, "cannot write report: " + path);
}

}  // namespace cqr

#endif  // CQR_REPORT_HPP
