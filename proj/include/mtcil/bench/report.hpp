// Copyright 2026 The mtcil Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtcil/bench/evaluate.hpp"
#include "mtcil/bench/metrics.hpp"
#include "mtcil/common.hpp"

namespace mtcil::bench {

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json metrics_json(const QualityMetrics& m) {
  return {{"ego_jerk", m.ego_jerk},
          {"other_jerk", m.other_jerk},
          {"dev_waypoint", m.dev_waypoint},
          {"dev_destination", m.dev_destination},
          {"heading_dev", m.heading_dev},
          {"total_steps", m.total_steps}};
}

inline QualityMetrics metrics_from_json(const nlohmann::json& j) {
  return {j.at("ego_jerk").get<double>(),        j.at("other_jerk").get<double>(),
          j.at("dev_waypoint").get<double>(),    j.at("dev_destination").get<double>(),
          j.at("heading_dev").get<double>(),     j.at("total_steps").get<double>()};
}

inline nlohmann::json report_json(const BenchmarkReport& r) {
  if (r.model_tag.empty()) fail("report: model tag is required");
  return {{"schema_version", kReportSchemaVersion},
          {"model_tag", r.model_tag},
          {"condition", to_string(r.condition)},
          {"condition_label", condition_label(r.condition)},
          {"episodes", r.episodes},
          {"counts",
           {{"Success", r.counts[0]},
            {"PoorEndPose", r.counts[1]},
            {"Timeout", r.counts[2]},
            {"LaneInvasion", r.counts[3]},
            {"Collision", r.counts[4]}}},
          {"rates", {{"SR", r.rates.SR}, {"PR", r.rates.PR}, {"TR", r.rates.TR}, {"LR", r.rates.LR}, {"CR", r.rates.CR}}},
          {"metrics", metrics_json(r.metrics)}};
}

inline BenchmarkReport report_from_json(const nlohmann::json& j) {
  const int v = j.at("schema_version").get<int>();
  if (v != kReportSchemaVersion) fail("report schema version ", v, " unsupported");
  BenchmarkReport r;
  r.model_tag = j.at("model_tag").get<std::string>();
  if (r.model_tag.empty()) fail("report: model tag is required");
  r.condition = condition_from_string(j.at("condition").get<std::string>());
  r.episodes = j.at("episodes").get<int>();
  const auto& c = j.at("counts");
  r.counts = {c.at("Success").get<int>(), c.at("PoorEndPose").get<int>(), c.at("Timeout").get<int>(),
              c.at("LaneInvasion").get<int>(), c.at("Collision").get<int>()};
  const auto& rt = j.at("rates");
  r.rates = {rt.at("SR").get<double>(), rt.at("PR").get<double>(), rt.at("TR").get<double>(),
             rt.at("LR").get<double>(), rt.at("CR").get<double>()};
  r.metrics = metrics_from_json(j.at("metrics"));
  return r;
}

inline bool operator==(const BenchmarkReport& a, const BenchmarkReport& b) {
  return report_json(a) == report_json(b);
}

// Fixed-width table: rates in percent with one decimal, metrics with three.
inline std::string render_report(const std::vector<BenchmarkReport>& reports) {
  std::string out;
  char line[512];
  std::snprintf(line, sizeof(line), "%-26s %-18s %5s %6s %6s %6s %6s %6s %9s %10s %8s %8s %11s %11s\n", "Condition",
                "Model", "N", "SR", "PR", "TR", "LR", "CR", "ego_jerk", "other_jerk", "dev_wp", "dev_dest",
                "heading_dev", "total_steps");
  out += line;
  for (const auto& r : reports) {
    if (r.model_tag.empty()) fail("render_report: model tag is required");
    const auto& m = r.metrics;
    std::snprintf(line, sizeof(line), "%-26s %-18s %5d %6.1f %6.1f %6.1f %6.1f %6.1f %9.3f %10.3f %8.3f %8.3f %11.3f %11.3f\n",
                  std::string(condition_label(r.condition)).c_str(), r.model_tag.c_str(), r.episodes,
                  100.0 * r.rates.SR, 100.0 * r.rates.PR, 100.0 * r.rates.TR, 100.0 * r.rates.LR, 100.0 * r.rates.CR,
                  m.ego_jerk, m.other_jerk, m.dev_waypoint, m.dev_destination, m.heading_dev, m.total_steps);
    out += line;
  }
  return out;
}

inline std::string render_report(const BenchmarkReport& r) { return render_report(std::vector<BenchmarkReport>{r}); }

}  // namespace mtcil::bench
