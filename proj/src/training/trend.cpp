#include "protocacl/training/trend.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "protocacl/errors.hpp"

namespace protocacl::training {

std::optional<TrendAxis> parse_axis(std::string_view name) {
  if (name == "N1") return TrendAxis::n1;
  if (name == "K1") return TrendAxis::k1;
  if (name == "N2") return TrendAxis::n2;
  if (name == "K2") return TrendAxis::k2;
  return std::nullopt;
}

std::string_view axis_name(TrendAxis axis) {
  switch (axis) {
    case TrendAxis::n1: return "N1";
    case TrendAxis::k1: return "K1";
    case TrendAxis::n2: return "N2";
    case TrendAxis::k2: return "K2";
  }
  return "?";
}

std::optional<TrendDirection> parse_direction(std::string_view name) {
  if (name == "increasing") return TrendDirection::increasing;
  if (name == "decreasing") return TrendDirection::decreasing;
  if (name == "nonincreasing") return TrendDirection::nonincreasing;
  if (name == "nondecreasing") return TrendDirection::nondecreasing;
  return std::nullopt;
}

std::string_view direction_name(TrendDirection direction) {
  switch (direction) {
    case TrendDirection::increasing: return "increasing";
    case TrendDirection::decreasing: return "decreasing";
    case TrendDirection::nonincreasing: return "nonincreasing";
    case TrendDirection::nondecreasing: return "nondecreasing";
  }
  return "?";
}

namespace {

std::size_t coord(const GridRow& r, TrendAxis a) {
  switch (a) {
    case TrendAxis::n1: return r.n1;
    case TrendAxis::k1: return r.k1;
    case TrendAxis::n2: return r.n2;
    case TrendAxis::k2: return r.k2;
  }
  return 0;
}

// Everything but the axis and the seed.
using GroupKey = std::tuple<std::string, std::size_t, std::size_t, std::size_t, std::size_t, std::size_t,
                            std::size_t>;

GroupKey key_of(const GridRow& r, TrendAxis axis) {
  std::array<std::size_t, 4> c{r.n1, r.k1, r.n2, r.k2};
  c[static_cast<std::size_t>(axis)] = 0;
  return {r.model_variant, c[0], c[1], c[2], c[3], r.q_per_class, r.iterations};
}

std::string label_of(const GridRow& r, TrendAxis axis) {
  std::string s = "variant=" + r.model_variant;
  const char* names[] = {"N1", "K1", "N2", "K2"};
  const std::size_t vals[] = {r.n1, r.k1, r.n2, r.k2};
  for (std::size_t i = 0; i < 4; ++i) {
    if (i != static_cast<std::size_t>(axis)) s += std::string(" ") + names[i] + "=" + std::to_string(vals[i]);
  }
  return s;
}

}  // namespace

TrendReport trend_check(const std::vector<GridRow>& rows, TrendAxis axis, TrendDirection direction) {
  TrendReport report;
  report.axis = axis;
  report.direction = direction;
  std::set<std::size_t> all_values;
  std::map<GroupKey, std::pair<std::string, std::map<std::size_t, std::vector<double>>>> groups;
  for (const auto& r : rows) {
    if (!r.ok() || !std::isfinite(r.accuracy_mean)) {
      throw ConfigError("grid", "cell " + r.cell_id + " has no result (" + r.status + ")");
    }
    all_values.insert(coord(r, axis));
    auto& g = groups[key_of(r, axis)];
    g.first = label_of(r, axis);
    g.second[coord(r, axis)].push_back(r.accuracy_mean);
  }
  if (rows.empty()) report.warnings.push_back("no rows: nothing to check");
  const bool strict = direction == TrendDirection::increasing || direction == TrendDirection::decreasing;
  const bool upward = direction == TrendDirection::increasing || direction == TrendDirection::nondecreasing;
  for (const auto& [key, entry] : groups) {
    const auto& [label, by_value] = entry;
    TrendGroup group;
    group.label = label;
    if (by_value.size() < all_values.size()) {
      for (auto v : all_values) {
        if (!by_value.contains(v)) {
          throw ConfigError("grid", "missing cell " + std::string(axis_name(axis)) + "=" + std::to_string(v) +
                                        " for " + label);
        }
      }
    }
    if (by_value.size() == 1) {
      group.vacuous = true;
      report.warnings.push_back("single " + std::string(axis_name(axis)) + " value for " + label +
                                ": vacuous pass");
    }
    std::optional<std::pair<std::size_t, double>> prev;
    for (const auto& [value, accs] : by_value) {
      double mean = 0.0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(accs.size());
      if (prev) {
        TrendStep step{prev->first, value, prev->second, mean, 0.0, false};
        step.margin = upward ? mean - prev->second : prev->second - mean;
        step.holds = strict ? step.margin > 0.0 : step.margin >= 0.0;
        group.holds = group.holds && step.holds;
        group.steps.push_back(step);
      }
      prev = {value, mean};
    }
    report.passed = report.passed && group.holds;
    report.groups.push_back(std::move(group));
  }
  return report;
}

std::string format_trend(const TrendReport& report) {
  std::string out = "trend: accuracy " + std::string(direction_name(report.direction)) + " in " +
                    std::string(axis_name(report.axis)) + "\n";
  char buf[256];
  for (const auto& g : report.groups) {
    out += (g.holds ? "  [ok]   " : "  [FAIL] ") + g.label + (g.vacuous ? " (vacuous)" : "") + "\n";
    for (const auto& s : g.steps) {
      std::snprintf(buf, sizeof buf, "         %s %zu -> %zu: %.4f -> %.4f margin %+.4f%s\n",
                    std::string(axis_name(report.axis)).c_str(), s.from, s.to, s.accuracy_from, s.accuracy_to,
                    s.margin, s.holds ? "" : "  violated");
      out += buf;
    }
  }
  for (const auto& w : report.warnings) out += "  warning: " + w + "\n";
  out += report.passed ? "result: pass\n" : "result: fail\n";
  return out;
}

}  // namespace protocacl::training
