#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slick/corpus.hpp"
#include "slick/eval.hpp"
#include "slick/gateway.hpp"
#include "slick/types.hpp"

namespace slick {

// Per-epoch greedy predictions for one fine-tuned variant.
struct EpochSnapshot {
  int epoch = 0;
  std::string variant_name;
  std::vector<PredictionRecord> train;
  std::vector<PredictionRecord> dev;
  std::vector<PredictionRecord> test;  // optional per epoch
};

struct EpochRow {
  int epoch = 0;
  std::array<int, 4> category_fitted{};  // fitted counts per category
  int n_kn = 0;
  int n_unk = 0;
  int dev_correct = 0;
  int dev_total = 0;
  std::optional<std::pair<int, int>> test_correct_total;

  double dev_accuracy() const { return dev_total == 0 ? 0.0 : static_cast<double>(dev_correct) / dev_total; }
  std::optional<double> test_accuracy() const {
    if (!test_correct_total) return std::nullopt;
    return test_correct_total->second == 0
               ? 0.0
               : static_cast<double>(test_correct_total->first) / test_correct_total->second;
  }
};

struct DynamicsSeries {
  std::string variant_name;
  int d_size = 0;
  int known_size = 0;
  int unknown_size = 0;
  std::array<int, 4> category_sizes{};
  std::vector<EpochRow> rows;  // epoch-ordered, 1..E

  double category_accuracy(const EpochRow& row, KnowledgeCategory c) const {
    const int size = category_sizes[category_index(c)];
    return size == 0 ? 0.0 : static_cast<double>(row.category_fitted[category_index(c)]) / size;
  }
};

struct LinearFit {
  double beta0 = 0.0;
  double beta_kn = 0.0;
  double beta_unk = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
  // The fit is meaningful only for N_kn <= |D| and N_unk <= |D|.
};

struct TTestReport {
  double t_statistic = 0.0;
  double p_value = 1.0;
  int df = 0;
  int n_subsets = 0;
  bool significant_05 = false;
  bool significant_01 = false;
};

struct PTrueRecord {
  std::string example_id;
  double p_true = 0.0;
  int n_probe_samples = 0;
};

struct SweepPoint {
  double threshold = 0.0;
  double fraction_unknown = 0.0;
  double accuracy_on_unknown = 0.0;
  int n_unknown = 0;
};

// Reads {variant_dir}/epoch_{N}/{split}.jsonl snapshots, validating that
// epochs run 1..E with no gaps and that every train/dev id appears exactly
// once per epoch.
std::vector<EpochSnapshot> ingest_snapshots(const std::filesystem::path& variant_dir,
                                            const DatasetVariant& variant,
                                            const CorpusManifest& manifest);

// Fitted = train prediction exact-matches the variant's target answer.
DynamicsSeries compute_series(const std::vector<EpochSnapshot>& snapshots,
                              const DatasetVariant& variant, const CorpusManifest& manifest);

// Earliest epoch attaining the maximum dev accuracy.
int detect_early_stop(const DynamicsSeries& series);

struct RegressionPoint {
  double accuracy = 0.0;
  double n_kn = 0.0;
  double n_unk = 0.0;
  double d_size = 1.0;
};

// Accuracy ~ beta0 + beta_kn * N_kn/|D| + beta_unk * N_unk/|D| (OLS).
LinearFit fit_linear_model(const std::vector<RegressionPoint>& points);

std::vector<RegressionPoint> collect_regression_points(
    const std::vector<DynamicsSeries>& series_set);

// Paired t statistic and two-sided p over a vector of per-subset differences.
// Zero-variance differences give t=0, p=1.
TTestReport paired_t_from_differences(const std::vector<double>& diffs);

// Shuffles ids under `seed`, partitions them into n_subsets parts with sizes
// differing by at most one, and runs a paired t-test over per-subset accuracy
// differences.
TTestReport paired_t_test(const std::vector<PredictionRecord>& preds_a,
                          const std::vector<PredictionRecord>& preds_b,
                          const std::map<std::string, std::vector<std::string>>& gold_by_id,
                          int n_subsets, std::uint64_t seed);

// Builds the true/false probe prompt for (question, gold answer), draws
// n_probe_samples completions at T=1, and scores the fraction classified as
// affirming the answer.
std::string build_ptrue_prompt(const std::string& question, const std::string& proposed_answer);
bool classify_true_completion(const std::string& completion);
PTrueRecord ptrue_score(const QAPair& pair, const Gateway& gateway, CacheStore* cache,
                        int n_probe_samples, std::optional<std::uint64_t> seed = std::nullopt);

// For each threshold in {unique scores} + {0, 1}: classify p_true < threshold
// as Unknown, report the fraction so classified and the post-fine-tuning
// accuracy on that set.
std::vector<SweepPoint> ptrue_threshold_sweep(const std::vector<PTrueRecord>& records,
                                              const std::map<std::string, bool>& post_ft_correct);

nlohmann::json series_to_json(const DynamicsSeries& series);
DynamicsSeries series_from_json(const nlohmann::json& j);

// Tidy CSV emission (17 significant digits so re-parsing is exact).
void write_series_csv(const std::filesystem::path& path, const DynamicsSeries& series);
void write_accuracy_vs_unknown_csv(const std::filesystem::path& path,
                                   const std::vector<DynamicsSeries>& series_set,
                                   const std::map<std::string, double>& unknown_percent_by_variant,
                                   const std::vector<int>& durations,
                                   bool include_early_stop = true);
void write_fitted_pies_csv(const std::filesystem::path& path,
                           const std::vector<DynamicsSeries>& series_set);
void write_ptrue_curve_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& curve);
void write_regression_scatter_csv(const std::filesystem::path& path,
                                  const std::vector<RegressionPoint>& points, const LinearFit& fit);

}  // namespace slick
