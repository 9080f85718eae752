#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protocacl/training/grid.hpp"

namespace protocacl::training {

enum class TrendAxis { n1, k1, n2, k2 };
enum class TrendDirection { increasing, decreasing, nonincreasing, nondecreasing };

std::optional<TrendAxis> parse_axis(std::string_view name);  // "N1", "K1", "N2", "K2"
std::string_view axis_name(TrendAxis axis);
std::optional<TrendDirection> parse_direction(std::string_view name);
std::string_view direction_name(TrendDirection direction);

// Consecutive pair along the axis. `margin` is signed so that a positive
// value supports the direction (strict directions need margin > 0, weak
// ones margin >= 0).
struct TrendStep {
  std::size_t from = 0;
  std::size_t to = 0;
  double accuracy_from = 0.0;
  double accuracy_to = 0.0;
  double margin = 0.0;
  bool holds = false;
};

// Rows sharing every coordinate except the axis (and the seed), averaged over seeds.
struct TrendGroup {
  std::string label;  // e.g. "variant=proto N1=5 N2=5 K1=5"
  std::vector<TrendStep> steps;
  bool holds = true;
  bool vacuous = false;  // a single axis value
};

struct TrendReport {
  TrendAxis axis = TrendAxis::k2;
  TrendDirection direction = TrendDirection::increasing;
  std::vector<TrendGroup> groups;
  std::vector<std::string> warnings;
  bool passed = true;
};

// Throws ConfigError when a row failed, or when a group lacks an axis value
// present elsewhere in the table.
TrendReport trend_check(const std::vector<GridRow>& rows, TrendAxis axis, TrendDirection direction);

std::string format_trend(const TrendReport& report);

}  // namespace protocacl::training
