#include "iclsel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <unordered_map>

#include "iclsel/digest.hpp"
#include "iclsel/rng.hpp"

namespace iclsel {

using nlohmann::json;

namespace {

// Linear interpolation between order statistics of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string ids_digest(const std::vector<PredictionRecord>& records) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.query_id);
  std::sort(ids.begin(), ids.end());
  std::string joined;
  for (const auto& id : ids) {
    joined += id;
    joined += '\n';
  }
  return sha256_hex(joined).substr(0, 16);
}

std::unordered_map<std::string, const PredictionRecord*> by_id(const std::vector<PredictionRecord>& records) {
  std::unordered_map<std::string, const PredictionRecord*> map;
  for (const auto& r : records) {
    if (!map.emplace(r.query_id, &r).second) {
      throw Error("duplicate_id", "query '" + r.query_id + "' appears twice in one prediction set");
    }
  }
  return map;
}

}  // namespace

EvalReport score(const std::vector<PredictionRecord>& records, const ReportDescriptor& descriptor,
                 const BootstrapOptions& bootstrap) {
  if (records.empty()) throw Error("empty_input", "no prediction records to score");
  EvalReport report;
  report.config = descriptor;
  report.config_hash = records.front().config_hash;
  report.n = records.size();

  std::vector<char> correct(records.size(), 0);
  std::size_t n_correct = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.config_hash != report.config_hash) {
      throw Error("mixed_config", "records carry different config hashes ('" + report.config_hash +
                                      "' and '" + r.config_hash + "')");
    }
    if (!r.gold) throw Error("missing_label", "query '" + r.query_id + "' has no gold label");
    const Ideology gold = *r.gold;
    Ideology column = parse_failure_column(gold);
    if (r.status == ParseStatus::ok && r.pred) {
      column = *r.pred;
    } else {
      ++report.parse_failure_count;
    }
    ++report.confusion[index_of(gold)][index_of(column)];
    if (column == gold && r.status == ParseStatus::ok) {
      correct[i] = 1;
      ++n_correct;
    }
  }
  const double n = static_cast<double>(records.size());
  report.accuracy = static_cast<double>(n_correct) / n;
  report.ids_digest = ids_digest(records);

  // Each resample draws from its own derived stream, so resamples could run
  // in any order or in parallel and give the same interval.
  std::vector<double> resampled(std::max<std::size_t>(bootstrap.resamples, 1));
  for (std::size_t r = 0; r < resampled.size(); ++r) {
    Rng rng(derive_seed(bootstrap.seed, r));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < records.size(); ++i) hits += correct[uniform_index(rng, records.size())];
    resampled[r] = static_cast<double>(hits) / n;
  }
  std::sort(resampled.begin(), resampled.end());
  report.ci_lo = std::min(quantile_sorted(resampled, 0.025), report.accuracy);
  report.ci_hi = std::max(quantile_sorted(resampled, 0.975), report.accuracy);
  return report;
}

DeltaMatrix delta(const EvalReport& a, const EvalReport& b) {
  if (a.n != b.n || a.ids_digest != b.ids_digest) {
    throw Error("id_mismatch", "reports cover different test items");
  }
  DeltaMatrix out{};
  for (std::size_t row = 0; row < kNumIdeologies; ++row) {
    std::size_t total_a = 0;
    std::size_t total_b = 0;
    for (std::size_t col = 0; col < kNumIdeologies; ++col) {
      total_a += a.confusion[row][col];
      total_b += b.confusion[row][col];
    }
    if (total_a != total_b) throw Error("id_mismatch", "reports have different gold label counts");
    if (total_a == 0) continue;
    for (std::size_t col = 0; col < kNumIdeologies; ++col) {
      const double diff = static_cast<double>(b.confusion[row][col]) -
                          static_cast<double>(a.confusion[row][col]);
      out[row][col] = 100.0 * diff / static_cast<double>(total_a);
    }
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  json doc;
  doc["config"] = {{"dataset", report.config.dataset},     {"k", report.config.k},
                   {"fields", report.config.fields},       {"selection", report.config.selection},
                   {"ordering", report.config.ordering},   {"model", report.config.model}};
  doc["config_hash"] = report.config_hash;
  doc["n"] = report.n;
  doc["accuracy"] = report.accuracy;
  doc["ci95"] = {report.ci_lo, report.ci_hi};
  doc["confusion"] = report.confusion;
  doc["labels"] = {"liberal", "neutral", "conservative"};
  doc["parse_failure_count"] = report.parse_failure_count;
  doc["ids_digest"] = report.ids_digest;
  return doc.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    EvalReport report;
    const auto& cfg = doc.at("config");
    report.config = {cfg.at("dataset").get<std::string>(), cfg.at("k").get<int>(),
                     cfg.at("fields").get<std::string>(),  cfg.at("selection").get<std::string>(),
                     cfg.at("ordering").get<std::string>(), cfg.at("model").get<std::string>()};
    report.config_hash = doc.at("config_hash").get<std::string>();
    report.n = doc.at("n").get<std::size_t>();
    report.accuracy = doc.at("accuracy").get<double>();
    report.ci_lo = doc.at("ci95").at(0).get<double>();
    report.ci_hi = doc.at("ci95").at(1).get<double>();
    report.confusion = doc.at("confusion").get<ConfusionMatrix>();
    report.parse_failure_count = doc.at("parse_failure_count").get<std::size_t>();
    report.ids_digest = doc.at("ids_digest").get<std::string>();
    return report;
  } catch (const json::exception& e) {
    throw Error("malformed_report", e.what());
  }
}

std::string delta_json(const DeltaMatrix& matrix) {
  json doc;
  doc["labels"] = {"liberal", "neutral", "conservative"};
  doc["delta"] = matrix;
  return doc.dump(2);
}

std::string McNemarResult::stars() const {
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

double chi2_1df_survival(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c, McNemarMethod method) {
  McNemarResult result;
  result.b = b;
  result.c = c;
  const std::size_t discordant = b + c;
  if (discordant == 0) return result;
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c));
  const double corrected = diff - 1.0;
  result.statistic = corrected * corrected / static_cast<double>(discordant);
  if (method == McNemarMethod::corrected_chi2) {
    result.p = chi2_1df_survival(result.statistic);
  } else {
    // Two-sided exact binomial test of min(b, c) under Binomial(b + c, 1/2).
    const std::size_t low = std::min(b, c);
    const double n = static_cast<double>(discordant);
    double tail = 0.0;
    for (std::size_t i = 0; i <= low; ++i) {
      const double x = static_cast<double>(i);
      tail += std::exp(std::lgamma(n + 1) - std::lgamma(x + 1) - std::lgamma(n - x + 1) - n * std::log(2.0));
    }
    result.p = std::min(1.0, 2.0 * tail);
  }
  return result;
}

McNemarResult mcnemar(const std::vector<PredictionRecord>& a, const std::vector<PredictionRecord>& b,
                      McNemarMethod method) {
  const auto map_b = by_id(b);
  if (by_id(a).size() != map_b.size()) throw Error("id_mismatch", "prediction sets differ in size");
  std::size_t only_a = 0;
  std::size_t only_b = 0;
  for (const auto& ra : a) {
    auto it = map_b.find(ra.query_id);
    if (it == map_b.end()) {
      throw Error("id_mismatch", "query '" + ra.query_id + "' missing from the second prediction set");
    }
    const bool a_ok = ra.correct();
    const bool b_ok = it->second->correct();
    if (a_ok && !b_ok) ++only_a;
    if (!a_ok && b_ok) ++only_b;
  }
  return mcnemar_from_counts(only_a, only_b, method);
}

std::string comparison_json(const std::string& label_a, const std::string& label_b,
                            const McNemarResult& result, McNemarMethod method) {
  json doc;
  doc["pair"] = {label_a, label_b};
  doc["statistic"] = result.statistic;
  doc["p"] = result.p;
  doc["stars"] = result.stars();
  doc["b"] = result.b;
  doc["c"] = result.c;
  doc["method"] = method == McNemarMethod::corrected_chi2 ? "corrected_chi2" : "exact_binomial";
  return doc.dump(2);
}

}  // namespace iclsel
