#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "iclsel/llm_gateway.hpp"

namespace iclsel {

// rows = gold, cols = predicted, in Liberal/Neutral/Conservative order.
using ConfusionMatrix = std::array<std::array<std::size_t, kNumIdeologies>, kNumIdeologies>;
using DeltaMatrix = std::array<std::array<double, kNumIdeologies>, kNumIdeologies>;

// What produced a set of predictions.
struct ReportDescriptor {
  std::string dataset;
  int k = 0;
  std::string fields;
  std::string selection;
  std::string ordering;
  std::string model;
};

struct EvalReport {
  ReportDescriptor config;
  std::string config_hash;
  std::size_t n = 0;
  double accuracy = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  ConfusionMatrix confusion{};
  std::size_t parse_failure_count = 0;
  std::string ids_digest;  // digest of the sorted query ids
};

struct BootstrapOptions {
  std::size_t resamples = 1000;
  std::uint64_t seed = 0;
};

// Column a failed parse is counted in: never the gold column.
constexpr Ideology parse_failure_column(Ideology gold) {
  return ideology_from_index((index_of(gold) + 1) % kNumIdeologies);
}

// Accuracy, 95% percentile-bootstrap interval and confusion matrix. Records
// without an ok parse count as wrong and land in parse_failure_column(gold).
// Throws on empty input, mixed config hashes or missing gold labels.
EvalReport score(const std::vector<PredictionRecord>& records, const ReportDescriptor& descriptor = {},
                 const BootstrapOptions& bootstrap = {});

// Per-gold-row percentages of `b` minus those of `a`. Both reports must cover
// the same query ids.
DeltaMatrix delta(const EvalReport& a, const EvalReport& b);

std::string report_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string delta_json(const DeltaMatrix& matrix);

enum class McNemarMethod { corrected_chi2, exact_binomial };

struct McNemarResult {
  std::size_t b = 0;  // A correct, B wrong
  std::size_t c = 0;  // A wrong, B correct
  double statistic = 0.0;
  double p = 1.0;

  // "**" below 0.01, "*" below 0.05, otherwise empty.
  std::string stars() const;
};

// Survival function of the chi-square distribution with one degree of freedom.
double chi2_1df_survival(double x);

// statistic is always the continuity-corrected (|b-c|-1)^2/(b+c), taken
// literally (b == c gives 1/(b+c)); the method picks how p is computed.
// b + c == 0 gives (0, 1).
McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c,
                                  McNemarMethod method = McNemarMethod::corrected_chi2);

McNemarResult mcnemar(const std::vector<PredictionRecord>& a, const std::vector<PredictionRecord>& b,
                      McNemarMethod method = McNemarMethod::corrected_chi2);

// {"pair": [a, b], "statistic", "p", "stars", "b", "c", "method"}
std::string comparison_json(const std::string& label_a, const std::string& label_b,
                            const McNemarResult& result, McNemarMethod method);

}  // namespace iclsel
