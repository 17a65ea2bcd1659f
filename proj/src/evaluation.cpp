#include "armgraph/evaluation.hpp"

#include <cstdio>

#include "armgraph/labeled_graph.hpp"

namespace armgraph::eval {
namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

bool is_positive(int label) {
  if (label == kMalwareLabel) return true;
  if (label == kBenignLabel) return false;
  throw EvalError(EvalErrc::kInvalidClass, "class " + std::to_string(label) + " is neither malware nor benign");
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size()) {
    throw EvalError(EvalErrc::kLengthMismatch,
                    std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(truth.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool actual = is_positive(truth[i]);
    const bool predicted = is_positive(predictions[i]);
    if (actual) (predicted ? cm.tp : cm.fn)++;
    else (predicted ? cm.fp : cm.tn)++;
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EvalError(EvalErrc::kEmptyMatrix, "confusion matrix is empty");
  MetricsReport m;
  m.precision = ratio(cm.tp, cm.tp + cm.fp);
  m.recall = ratio(cm.tp, cm.tp + cm.fn);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  m.false_alarm_rate = ratio(cm.fp, cm.tn + cm.fp);
  m.accuracy = ratio(cm.tp + cm.tn, cm.total());
  return m;
}

std::string format_report(const ConfusionMatrix& cm, const MetricsReport& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "                   predicted malware  predicted benign\n"
                "actual malware     %17zu  %16zu\n"
                "actual benign      %17zu  %16zu\n"
                "\n",
                cm.tp, cm.fn, cm.fp, cm.tn);
  std::string out = buf;
  auto row = [&out](const char* name, const std::optional<double>& v) {
    char line[64];
    std::snprintf(line, sizeof line, "%-18s %s\n", name, fixed(v).c_str());
    out += line;
  };
  row("precision", m.precision);
  row("recall", m.recall);
  row("f1", m.f1);
  row("false_alarm_rate", m.false_alarm_rate);
  row("accuracy", m.accuracy);
  return out;
}

std::string format_key_values(const ConfusionMatrix& cm, const MetricsReport& m) {
  std::string out;
  out += "tp=" + std::to_string(cm.tp) + '\n';
  out += "fn=" + std::to_string(cm.fn) + '\n';
  out += "fp=" + std::to_string(cm.fp) + '\n';
  out += "tn=" + std::to_string(cm.tn) + '\n';
  out += "precision=" + fixed(m.precision) + '\n';
  out += "recall=" + fixed(m.recall) + '\n';
  out += "f1=" + fixed(m.f1) + '\n';
  out += "false_alarm_rate=" + fixed(m.false_alarm_rate) + '\n';
  out += "accuracy=" + fixed(m.accuracy) + '\n';
  return out;
}

}  // namespace armgraph::eval
