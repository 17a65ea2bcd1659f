#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "armgraph/error.hpp"

namespace armgraph::eval {

enum class EvalErrc { kLengthMismatch, kInvalidClass, kEmptyMatrix };
using EvalError = Error<EvalErrc>;

// Malware is the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fn + fp + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// A metric with a zero denominator is std::nullopt.
struct MetricsReport {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> false_alarm_rate;
  std::optional<double> accuracy;
};

// Maps a dataset label (0 malware, 1 benign) to the positive/negative side.
bool is_positive(int label);

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truth);

MetricsReport metrics(const ConfusionMatrix& cm);

// Aligned table for people.
std::string format_report(const ConfusionMatrix& cm, const MetricsReport& m);
// `key=value` lines; undefined metrics print as `undefined`.
std::string format_key_values(const ConfusionMatrix& cm, const MetricsReport& m);

}  // namespace armgraph::eval
