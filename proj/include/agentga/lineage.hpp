#pragma once

// Read-side statistics over an engine event log: per-operator tournament
// outcomes, best-score progression and the parent/child lineage graph.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agentga/direction.hpp"
#include "agentga/event_log.hpp"
#include "agentga/operators.hpp"
#include "agentga/pool.hpp"
#include "json.hpp"

namespace agentga {

inline constexpr int kReportSchemaVersion = 1;

struct OperatorStats {
  Operator op = Operator::Initial;
  int tournaments = 0;
  int wins = 0;
  double win_rate = 0.0;
  std::optional<double> median_relative_gain;

  int losses() const { return tournaments - wins; }
  friend bool operator==(const OperatorStats&, const OperatorStats&) = default;
};

struct ProgressPoint {
  int iteration = 0;
  double best = 0.0;
  friend bool operator==(const ProgressPoint&, const ProgressPoint&) = default;
};

struct LineageEdge {
  std::string child_id;
  std::vector<std::string> parent_ids;
  bool won = false;
  int iteration = 0;
  int slot = 0;
  Operator op = Operator::Initial;
  friend bool operator==(const LineageEdge&, const LineageEdge&) = default;
};

struct LineageReport {
  std::vector<OperatorStats> stats;
  std::vector<ProgressPoint> progression;
  std::vector<LineageEdge> edges;
  int malformed_records = 0;
  int zero_parent_gains = 0;  // relative gains skipped because the parent scored 0
};

namespace detail {

inline std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Tournament records in log order; records that fail to parse are counted.
inline std::vector<TournamentRecord> tournaments_of(const std::vector<nlohmann::json>& records, int& malformed) {
  std::vector<TournamentRecord> out;
  for (const auto& r : records) {
    if (r.value("type", std::string{}) != "tournament") continue;
    try {
      auto rec = tournament_record_from_json(r);
      if (rec.child_won && !rec.child_valid) throw std::runtime_error("winner without a valid child");
      out.push_back(std::move(rec));
    } catch (const std::exception&) {
      ++malformed;
    }
  }
  return out;
}

inline MetricDirection direction_of(const std::vector<nlohmann::json>& records) {
  for (const auto& r : records) {
    if (r.value("type", std::string{}) == "run_start" && r.contains("higher_is_better") &&
        r.at("higher_is_better").is_boolean())
      return {r.at("higher_is_better").get<bool>()};
  }
  return MetricDirection::higher();
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Counts only tournaments that had an elite parent. Invalid children count
/// as losses. Relative gain is delta / |parent score|.
inline std::vector<OperatorStats> compute_operator_stats(const std::vector<TournamentRecord>& records,
                                                         int* zero_parent_gains = nullptr) {
  std::map<Operator, OperatorStats> by_op;
  std::map<Operator, std::vector<double>> gains;
  for (const auto& r : records) {
    if (!r.parent_score) continue;
    auto& s = by_op[r.op];
    s.op = r.op;
    ++s.tournaments;
    if (r.child_won) ++s.wins;
    if (r.delta) {
      if (*r.parent_score == 0.0) {
        if (zero_parent_gains) ++*zero_parent_gains;
      } else {
        gains[r.op].push_back(*r.delta / std::abs(*r.parent_score));
      }
    }
  }
  std::vector<OperatorStats> out;
  for (auto& [op, s] : by_op) {
    s.win_rate = s.tournaments > 0 ? static_cast<double>(s.wins) / s.tournaments : 0.0;
    s.median_relative_gain = detail::median(gains[op]);
    out.push_back(s);
  }
  return out;
}

/// Win rate over every operator except Initial.
inline std::optional<double> pooled_parent_conditioned_win_rate(const std::vector<OperatorStats>& stats) {
  int t = 0, w = 0;
  for (const auto& s : stats) {
    if (!is_parent_conditioned(s.op)) continue;
    t += s.tournaments;
    w += s.wins;
  }
  if (t == 0) return std::nullopt;
  return static_cast<double>(w) / t;
}

inline std::optional<double> win_rate_of(const std::vector<OperatorStats>& stats, Operator op) {
  for (const auto& s : stats)
    if (s.op == op && s.tournaments > 0) return s.win_rate;
  return std::nullopt;
}

/// Best elite score after each iteration, replaying the tournament winners.
inline std::vector<ProgressPoint> best_score_progression(const std::vector<TournamentRecord>& records,
                                                         MetricDirection direction) {
  std::map<int, double> elite;  // slot -> score
  std::vector<ProgressPoint> out;
  auto flush = [&](int iteration) {
    std::optional<double> best;
    for (const auto& [slot, score] : elite)
      if (!best || better(score, *best, direction)) best = score;
    if (best) out.push_back({iteration, *best});
  };
  std::optional<int> current;
  for (const auto& r : records) {
    if (current && r.iteration != *current) flush(*current);
    current = r.iteration;
    if (r.child_won && r.child_score) elite[r.slot] = *r.child_score;
  }
  if (current) flush(*current);
  return out;
}

inline std::vector<LineageEdge> lineage_edges(const std::vector<TournamentRecord>& records) {
  std::vector<LineageEdge> out;
  for (const auto& r : records) {
    if (!r.child_id) continue;
    out.push_back({*r.child_id, r.parent_ids, r.child_won, r.iteration, r.slot, r.op});
  }
  return out;
}

inline LineageReport build_report(const ParsedLog& log) {
  LineageReport rep;
  rep.malformed_records = log.malformed;
  const auto records = detail::tournaments_of(log.records, rep.malformed_records);
  rep.stats = compute_operator_stats(records, &rep.zero_parent_gains);
  rep.progression = best_score_progression(records, detail::direction_of(log.records));
  rep.edges = lineage_edges(records);
  return rep;
}

inline LineageReport build_report(const fs::path& event_log) { return build_report(read_event_log(event_log)); }

// ---------------------------------------------------------------------------
// Export

enum class ReportFormat { Csv, Json };

inline constexpr const char* kOperatorCsvHeader = "operator,tournaments,wins,losses,win_rate,median_relative_gain";
inline constexpr const char* kProgressionCsvHeader = "iteration,best_score";
inline constexpr const char* kEdgesCsvHeader = "child_id,parent_ids,won,iteration,slot,operator";

inline std::string operator_stats_csv(const std::vector<OperatorStats>& stats) {
  std::ostringstream out;
  out << kOperatorCsvHeader << "\n";
  for (const auto& s : stats) {
    out << to_string(s.op) << ',' << s.tournaments << ',' << s.wins << ',' << s.losses() << ','
        << detail::format_double(s.win_rate) << ','
        << (s.median_relative_gain ? detail::format_double(*s.median_relative_gain) : "") << "\n";
  }
  return out.str();
}

inline std::vector<OperatorStats> parse_operator_stats_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != kOperatorCsvHeader) throw ConfigError("operator stats csv: unexpected header");
  std::vector<OperatorStats> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (line.back() == ',') cols.emplace_back();
    if (cols.size() != 6) throw ConfigError("operator stats csv: expected 6 columns");
    OperatorStats s;
    s.op = operator_from_string(cols[0]);
    s.tournaments = std::stoi(cols[1]);
    s.wins = std::stoi(cols[2]);
    s.win_rate = std::stod(cols[4]);
    if (!cols[5].empty()) s.median_relative_gain = std::stod(cols[5]);
    out.push_back(s);
  }
  return out;
}

inline std::string progression_csv(const std::vector<ProgressPoint>& points) {
  std::ostringstream out;
  out << kProgressionCsvHeader << "\n";
  for (const auto& p : points) out << p.iteration << ',' << detail::format_double(p.best) << "\n";
  return out.str();
}

inline std::string edges_csv(const std::vector<LineageEdge>& edges) {
  std::ostringstream out;
  out << kEdgesCsvHeader << "\n";
  for (const auto& e : edges) {
    std::string parents;
    for (std::size_t i = 0; i < e.parent_ids.size(); ++i) parents += (i ? ";" : "") + e.parent_ids[i];
    out << e.child_id << ',' << parents << ',' << (e.won ? 1 : 0) << ',' << e.iteration << ',' << e.slot << ','
        << to_string(e.op) << "\n";
  }
  return out.str();
}

inline nlohmann::json to_json(const LineageReport& rep) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& s : rep.stats) {
    ops.push_back({{"operator", std::string(to_string(s.op))},
                   {"tournaments", s.tournaments},
                   {"wins", s.wins},
                   {"losses", s.losses()},
                   {"win_rate", s.win_rate},
                   {"median_relative_gain", detail::opt_json(s.median_relative_gain)}});
  }
  nlohmann::json prog = nlohmann::json::array();
  for (const auto& p : rep.progression) prog.push_back({{"iteration", p.iteration}, {"best_score", p.best}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : rep.edges) {
    edges.push_back({{"child_id", e.child_id},
                     {"parent_ids", e.parent_ids},
                     {"won", e.won},
                     {"iteration", e.iteration},
                     {"slot", e.slot},
                     {"operator", std::string(to_string(e.op))}});
  }
  nlohmann::json j = {{"schema_version", kReportSchemaVersion},
                      {"operators", ops},
                      {"progression", prog},
                      {"edges", edges},
                      {"malformed_records", rep.malformed_records},
                      {"zero_parent_gains", rep.zero_parent_gains}};
  if (auto pooled = pooled_parent_conditioned_win_rate(rep.stats)) j["pooled_parent_conditioned_win_rate"] = *pooled;
  return j;
}

inline std::vector<OperatorStats> operator_stats_from_report_json(const nlohmann::json& j) {
  std::vector<OperatorStats> out;
  for (const auto& o : j.at("operators")) {
    OperatorStats s;
    s.op = operator_from_string(o.at("operator").get<std::string>());
    s.tournaments = o.at("tournaments").get<int>();
    s.wins = o.at("wins").get<int>();
    s.win_rate = o.at("win_rate").get<double>();
    s.median_relative_gain = detail::opt_double(o, "median_relative_gain");
    out.push_back(s);
  }
  return out;
}

/// Writes `<dir>/<stem>.json`, or `<dir>/<stem>_{operators,progression,edges}.csv`.
inline std::vector<fs::path> export_report(const LineageReport& rep, ReportFormat format, const fs::path& dir,
                                           const std::string& stem = "report") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw WorkspaceError("cannot write report " + p.string());
    out << text;
    if (!out) throw WorkspaceError("short write to report " + p.string());
  };
  std::vector<fs::path> written;
  if (format == ReportFormat::Json) {
    written.push_back(dir / (stem + ".json"));
    write(written.back(), to_json(rep).dump(2) + "\n");
  } else {
    written.push_back(dir / (stem + "_operators.csv"));
    write(written.back(), operator_stats_csv(rep.stats));
    written.push_back(dir / (stem + "_progression.csv"));
    write(written.back(), progression_csv(rep.progression));
    written.push_back(dir / (stem + "_edges.csv"));
    write(written.back(), edges_csv(rep.edges));
  }
  return written;
}

inline std::string format_stats_table(const std::vector<OperatorStats>& stats) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %11s %6s %9s %14s\n", "operator", "tournaments", "wins", "win_rate",
                "median_rel_gain");
  out << line;
  for (const auto& s : stats) {
    char gain[32] = "-";
    if (s.median_relative_gain) std::snprintf(gain, sizeof gain, "%.6g", *s.median_relative_gain);
    std::snprintf(line, sizeof line, "%-10s %11d %6d %8.1f%% %14s\n", std::string(to_string(s.op)).c_str(),
                  s.tournaments, s.wins, 100.0 * s.win_rate, gain);
    out << line;
  }
  if (auto pooled = pooled_parent_conditioned_win_rate(stats)) {
    std::snprintf(line, sizeof line, "parent-conditioned pooled win rate: %.1f%%\n", 100.0 * *pooled);
    out << line;
  }
  return out.str();
}

}  // namespace agentga
