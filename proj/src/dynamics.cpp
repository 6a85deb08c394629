#include "slick/dynamics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slick/digest.hpp"
#include "slick/rng.hpp"
#include "slick/stats.hpp"

namespace slick {

using nlohmann::json;

// ---------------------------------------------------------------------------
// snapshot ingestion

namespace {

std::vector<PredictionRecord> read_prediction_file(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw Error(errkind::IoError, "cannot open " + path.string());
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      PredictionRecord r;
      r.example_id = j.at("example_id").get<std::string>();
      r.predicted = j.at("predicted").get<std::string>();
      r.source_tag = j.value("source_tag", "");
      r.split = split;
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(errkind::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

void check_id_coverage(const std::vector<PredictionRecord>& records,
                       const std::set<std::string>& universe, const std::string& what, int epoch) {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (universe.find(r.example_id) == universe.end())
      throw Error(errkind::UnknownExample,
                  what + " epoch " + std::to_string(epoch) + ": unknown id " + r.example_id);
    if (!seen.insert(r.example_id).second)
      throw Error(errkind::DuplicateId,
                  what + " epoch " + std::to_string(epoch) + ": duplicate id " + r.example_id);
  }
  if (seen.size() != universe.size()) {
    for (const auto& id : universe)
      if (seen.find(id) == seen.end())
        throw Error(errkind::MissingPrediction,
                    what + " epoch " + std::to_string(epoch) + ": missing id " + id);
  }
}

}  // namespace

std::vector<EpochSnapshot> ingest_snapshots(const std::filesystem::path& variant_dir,
                                            const DatasetVariant& variant,
                                            const CorpusManifest& manifest) {
  std::map<int, std::filesystem::path> epoch_dirs;
  for (const auto& e : std::filesystem::directory_iterator(variant_dir)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    if (name.rfind("epoch_", 0) != 0) continue;
    int epoch = 0;
    try {
      epoch = std::stoi(name.substr(6));
    } catch (const std::exception&) {
      throw Error(errkind::ParseError, "bad epoch directory name: " + name);
    }
    epoch_dirs[epoch] = e.path();
  }
  if (epoch_dirs.empty())
    throw Error(errkind::MissingEpoch, "no epoch_N directories under " + variant_dir.string());
  int expected = 1;
  for (const auto& [epoch, dir] : epoch_dirs) {
    if (epoch != expected)
      throw Error(errkind::MissingEpoch, "missing epoch " + std::to_string(expected));
    ++expected;
  }

  std::set<std::string> train_ids;
  for (const auto& ex : variant.examples) train_ids.insert(ex.pair.id);
  std::set<std::string> dev_ids;
  std::set<std::string> test_ids;
  for (const auto& p : manifest.pairs) {
    if (p.split == Split::dev) dev_ids.insert(p.id);
    if (p.split == Split::test) test_ids.insert(p.id);
  }

  std::vector<EpochSnapshot> snapshots;
  for (const auto& [epoch, dir] : epoch_dirs) {
    EpochSnapshot snap;
    snap.epoch = epoch;
    snap.variant_name = variant.name;
    snap.train = read_prediction_file(dir / "train.jsonl", Split::train);
    snap.dev = read_prediction_file(dir / "dev.jsonl", Split::dev);
    check_id_coverage(snap.train, train_ids, "train", epoch);
    check_id_coverage(snap.dev, dev_ids, "dev", epoch);
    if (std::filesystem::exists(dir / "test.jsonl")) {
      snap.test = read_prediction_file(dir / "test.jsonl", Split::test);
      check_id_coverage(snap.test, test_ids, "test", epoch);
    }
    snapshots.push_back(std::move(snap));
  }
  return snapshots;
}

// ---------------------------------------------------------------------------
// series

DynamicsSeries compute_series(const std::vector<EpochSnapshot>& snapshots,
                              const DatasetVariant& variant, const CorpusManifest& manifest) {
  DynamicsSeries series;
  series.variant_name = variant.name;
  series.d_size = static_cast<int>(variant.examples.size());

  std::map<std::string, const VariantExample*> by_id;
  for (const auto& ex : variant.examples) {
    by_id[ex.pair.id] = &ex;
    ++series.category_sizes[category_index(ex.category)];
  }
  series.unknown_size = series.category_sizes[category_index(KnowledgeCategory::Unknown)];
  series.known_size = series.d_size - series.unknown_size;

  std::map<std::string, std::vector<std::string>> gold_by_id;
  for (const auto& p : manifest.pairs) gold_by_id[p.id] = p.gold_answers;

  for (const auto& snap : snapshots) {
    EpochRow row;
    row.epoch = snap.epoch;
    for (const auto& pred : snap.train) {
      const VariantExample* ex = by_id.at(pred.example_id);
      // fitted = greedy train prediction matches the training target
      if (exact_match(pred.predicted, {ex->target_answer})) {
        ++row.category_fitted[category_index(ex->category)];
        if (ex->category == KnowledgeCategory::Unknown)
          ++row.n_unk;
        else
          ++row.n_kn;
      }
    }
    for (const auto& pred : snap.dev) {
      ++row.dev_total;
      if (exact_match(pred.predicted, gold_by_id.at(pred.example_id))) ++row.dev_correct;
    }
    if (!snap.test.empty()) {
      int correct = 0;
      for (const auto& pred : snap.test)
        if (exact_match(pred.predicted, gold_by_id.at(pred.example_id))) ++correct;
      row.test_correct_total = {correct, static_cast<int>(snap.test.size())};
    }
    series.rows.push_back(row);
  }
  return series;
}

int detect_early_stop(const DynamicsSeries& series) {
  if (series.rows.empty())
    throw Error(errkind::InvalidRequest, "series has no epochs with dev accuracy");
  // Exact comparison on counts; dev_total is constant across epochs.
  int best_epoch = series.rows.front().epoch;
  int best_correct = series.rows.front().dev_correct;
  for (const auto& row : series.rows) {
    if (row.dev_correct > best_correct) {
      best_correct = row.dev_correct;
      best_epoch = row.epoch;
    }
  }
  return best_epoch;
}

// ---------------------------------------------------------------------------
// linear model

std::vector<RegressionPoint> collect_regression_points(const std::vector<DynamicsSeries>& series_set) {
  std::vector<RegressionPoint> points;
  for (const auto& series : series_set) {
    for (const auto& row : series.rows) {
      const auto acc = row.test_accuracy();
      if (!acc) continue;
      RegressionPoint p;
      p.accuracy = *acc;
      p.n_kn = row.n_kn;
      p.n_unk = row.n_unk;
      p.d_size = series.d_size;
      points.push_back(p);
    }
  }
  return points;
}

LinearFit fit_linear_model(const std::vector<RegressionPoint>& points) {
  if (points.size() < 3)
    throw Error(errkind::InvalidRequest, "linear model needs at least 3 points");
  std::vector<std::vector<double>> design;
  std::vector<double> response;
  design.reserve(points.size());
  response.reserve(points.size());
  for (const auto& p : points) {
    if (p.d_size <= 0) throw Error(errkind::InvalidRequest, "d_size must be positive");
    design.push_back({1.0, p.n_kn / p.d_size, p.n_unk / p.d_size});
    response.push_back(p.accuracy);
  }
  const OlsFit ols = ols_fit(design, response);
  LinearFit fit;
  fit.beta0 = ols.beta[0];
  fit.beta_kn = ols.beta[1];
  fit.beta_unk = ols.beta[2];
  fit.r_squared = ols.r_squared;
  fit.n_points = static_cast<int>(points.size());
  return fit;
}

// ---------------------------------------------------------------------------
// paired t-test

TTestReport paired_t_from_differences(const std::vector<double>& diffs) {
  if (diffs.size() < 2)
    throw Error(errkind::InvalidRequest, "need at least 2 paired differences");
  const int n = static_cast<int>(diffs.size());
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= n;
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  var /= n - 1;

  TTestReport report;
  report.n_subsets = n;
  report.df = n - 1;
  if (var == 0.0) {
    report.t_statistic = 0.0;
    report.p_value = 1.0;
  } else {
    report.t_statistic = mean / std::sqrt(var / n);
    report.p_value = student_t_two_sided_p(report.t_statistic, report.df);
  }
  report.significant_05 = report.p_value < 0.05;
  report.significant_01 = report.p_value < 0.01;
  return report;
}

TTestReport paired_t_test(const std::vector<PredictionRecord>& preds_a,
                          const std::vector<PredictionRecord>& preds_b,
                          const std::map<std::string, std::vector<std::string>>& gold_by_id,
                          int n_subsets, std::uint64_t seed) {
  if (n_subsets < 2) throw Error(errkind::InvalidRequest, "n_subsets must be >= 2");

  std::map<std::string, bool> correct_a;
  std::map<std::string, bool> correct_b;
  for (const auto& p : preds_a) {
    auto it = gold_by_id.find(p.example_id);
    if (it == gold_by_id.end())
      throw Error(errkind::UnknownExample, "id not in corpus: " + p.example_id);
    if (!correct_a.emplace(p.example_id, exact_match(p.predicted, it->second)).second)
      throw Error(errkind::DuplicatePrediction, "duplicate prediction (a) for " + p.example_id);
  }
  for (const auto& p : preds_b) {
    auto it = gold_by_id.find(p.example_id);
    if (it == gold_by_id.end())
      throw Error(errkind::UnknownExample, "id not in corpus: " + p.example_id);
    if (!correct_b.emplace(p.example_id, exact_match(p.predicted, it->second)).second)
      throw Error(errkind::DuplicatePrediction, "duplicate prediction (b) for " + p.example_id);
  }
  if (correct_a.size() != correct_b.size())
    throw Error(errkind::IdMismatch, "prediction sets cover different ids");
  std::vector<std::string> ids;
  ids.reserve(correct_a.size());
  for (const auto& [id, c] : correct_a) {
    if (correct_b.find(id) == correct_b.end())
      throw Error(errkind::IdMismatch, "id " + id + " present in one prediction set only");
    ids.push_back(id);
  }
  if (static_cast<int>(ids.size()) < n_subsets)
    throw Error(errkind::InvalidRequest, "need at least n_subsets examples");

  // ids are sorted (map order); shuffle, then cut into parts differing by <= 1.
  Rng rng(seed);
  rng.shuffle(ids);
  const int n = static_cast<int>(ids.size());
  const int base = n / n_subsets;
  const int leftover = n % n_subsets;

  std::vector<double> diffs;
  diffs.reserve(static_cast<std::size_t>(n_subsets));
  std::size_t cursor = 0;
  for (int s = 0; s < n_subsets; ++s) {
    const int size = base + (s < leftover ? 1 : 0);
    int hits_a = 0;
    int hits_b = 0;
    for (int i = 0; i < size; ++i, ++cursor) {
      if (correct_a.at(ids[cursor])) ++hits_a;
      if (correct_b.at(ids[cursor])) ++hits_b;
    }
    diffs.push_back((static_cast<double>(hits_a) - hits_b) / size);
  }
  return paired_t_from_differences(diffs);
}

// ---------------------------------------------------------------------------
// P(True)

std::string build_ptrue_prompt(const std::string& question, const std::string& proposed_answer) {
  std::string prompt = "Question: ";
  prompt += question;
  prompt += "\nProposed Answer: ";
  prompt += proposed_answer;
  prompt += "\nIs the proposed answer:\n(A) True\n(B) False\nThe proposed answer is:";
  return prompt;
}

bool classify_true_completion(const std::string& completion) {
  std::size_t i = 0;
  while (i < completion.size() && std::isspace(static_cast<unsigned char>(completion[i]))) ++i;
  const std::string s = completion.substr(i);
  if (s.rfind("(A)", 0) == 0) return true;
  if (!s.empty() && s[0] == 'A') return true;
  if (s.size() >= 4) {
    std::string head = s.substr(0, 4);
    for (auto& c : head) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (head == "true") return true;
  }
  return false;
}

PTrueRecord ptrue_score(const QAPair& pair, const Gateway& gateway, CacheStore* cache,
                        int n_probe_samples, std::optional<std::uint64_t> seed) {
  if (n_probe_samples < 1)
    throw Error(errkind::InvalidRequest, "n_probe_samples must be >= 1");
  CompletionRequest request;
  request.prompt = build_ptrue_prompt(pair.question, pair.gold_answers.front());
  request.temperature = 1.0;
  request.n_samples = n_probe_samples;
  request.max_tokens = 8;
  request.seed = seed;

  const CompletionResult result = cache != nullptr ? gateway.cached_complete(*cache, request)
                                                   : gateway.complete(request);
  int n_true = 0;
  for (const auto& text : result.texts)
    if (classify_true_completion(text)) ++n_true;

  PTrueRecord record;
  record.example_id = pair.id;
  record.n_probe_samples = n_probe_samples;
  record.p_true = static_cast<double>(n_true) / n_probe_samples;
  return record;
}

std::vector<SweepPoint> ptrue_threshold_sweep(const std::vector<PTrueRecord>& records,
                                              const std::map<std::string, bool>& post_ft_correct) {
  std::vector<const PTrueRecord*> usable;
  for (const auto& r : records)
    if (post_ft_correct.find(r.example_id) != post_ft_correct.end()) usable.push_back(&r);
  if (usable.empty())
    throw Error(errkind::EmptyIntersection, "no ids shared between records and evaluation map");

  std::set<double> thresholds{0.0, 1.0};
  for (const auto* r : usable) thresholds.insert(r->p_true);

  std::vector<SweepPoint> curve;
  for (double threshold : thresholds) {
    SweepPoint point;
    point.threshold = threshold;
    int correct = 0;
    for (const auto* r : usable) {
      if (r->p_true < threshold) {
        ++point.n_unknown;
        if (post_ft_correct.at(r->example_id)) ++correct;
      }
    }
    point.fraction_unknown = static_cast<double>(point.n_unknown) / usable.size();
    point.accuracy_on_unknown =
        point.n_unknown == 0 ? 0.0 : static_cast<double>(correct) / point.n_unknown;
    curve.push_back(point);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// series persistence

json series_to_json(const DynamicsSeries& series) {
  json rows = json::array();
  for (const auto& row : series.rows) {
    json r{{"epoch", row.epoch},
           {"category_fitted", row.category_fitted},
           {"n_kn", row.n_kn},
           {"n_unk", row.n_unk},
           {"dev_correct", row.dev_correct},
           {"dev_total", row.dev_total}};
    if (row.test_correct_total) {
      r["test_correct"] = row.test_correct_total->first;
      r["test_total"] = row.test_correct_total->second;
    }
    rows.push_back(std::move(r));
  }
  return json{{"variant_name", series.variant_name},
              {"d_size", series.d_size},
              {"known_size", series.known_size},
              {"unknown_size", series.unknown_size},
              {"category_sizes", series.category_sizes},
              {"rows", std::move(rows)}};
}

DynamicsSeries series_from_json(const json& j) {
  DynamicsSeries series;
  series.variant_name = j.at("variant_name").get<std::string>();
  series.d_size = j.at("d_size").get<int>();
  series.known_size = j.at("known_size").get<int>();
  series.unknown_size = j.at("unknown_size").get<int>();
  series.category_sizes = j.at("category_sizes").get<std::array<int, 4>>();
  for (const auto& r : j.at("rows")) {
    EpochRow row;
    row.epoch = r.at("epoch").get<int>();
    row.category_fitted = r.at("category_fitted").get<std::array<int, 4>>();
    row.n_kn = r.at("n_kn").get<int>();
    row.n_unk = r.at("n_unk").get<int>();
    row.dev_correct = r.at("dev_correct").get<int>();
    row.dev_total = r.at("dev_total").get<int>();
    if (r.contains("test_correct"))
      row.test_correct_total = {r.at("test_correct").get<int>(), r.at("test_total").get<int>()};
    series.rows.push_back(row);
  }
  return series;
}

// ---------------------------------------------------------------------------
// plot data

namespace {

std::string fmt(double v) { return canonical_double(v); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(errkind::IoError, "cannot write " + path.string());
  return out;
}

}  // namespace

void write_series_csv(const std::filesystem::path& path, const DynamicsSeries& series) {
  auto out = open_out(path);
  out << "epoch,train_acc_highly_known,train_acc_maybe_known,train_acc_weakly_known,"
         "train_acc_unknown,train_acc_known,train_acc_overall,n_kn,n_unk,dev_accuracy,test_accuracy\n";
  for (const auto& row : series.rows) {
    const double known_acc =
        series.known_size == 0 ? 0.0 : static_cast<double>(row.n_kn) / series.known_size;
    const double overall_acc =
        series.d_size == 0 ? 0.0 : static_cast<double>(row.n_kn + row.n_unk) / series.d_size;
    out << row.epoch;
    for (auto cat : kAllCategories) out << ',' << fmt(series.category_accuracy(row, cat));
    out << ',' << fmt(known_acc) << ',' << fmt(overall_acc) << ',' << row.n_kn << ',' << row.n_unk
        << ',' << fmt(row.dev_accuracy());
    out << ',';
    if (auto acc = row.test_accuracy()) out << fmt(*acc);
    out << '\n';
  }
}

void write_accuracy_vs_unknown_csv(const std::filesystem::path& path,
                                   const std::vector<DynamicsSeries>& series_set,
                                   const std::map<std::string, double>& unknown_percent_by_variant,
                                   const std::vector<int>& durations, bool include_early_stop) {
  auto out = open_out(path);
  out << "variant,unknown_percent,duration,epoch,test_accuracy\n";
  for (const auto& series : series_set) {
    auto pct_it = unknown_percent_by_variant.find(series.variant_name);
    const double pct = pct_it != unknown_percent_by_variant.end() ? pct_it->second : -1.0;
    std::vector<std::pair<std::string, int>> marks;
    for (int d : durations)
      if (d <= static_cast<int>(series.rows.size())) marks.emplace_back(std::to_string(d), d);
    if (include_early_stop) marks.emplace_back("early_stop", detect_early_stop(series));
    for (const auto& [label, epoch] : marks) {
      const auto& row = series.rows.at(static_cast<std::size_t>(epoch - 1));
      const auto acc = row.test_accuracy();
      if (!acc) continue;
      out << series.variant_name << ',' << fmt(pct) << ',' << label << ',' << epoch << ','
          << fmt(*acc) << '\n';
    }
  }
}

void write_fitted_pies_csv(const std::filesystem::path& path,
                           const std::vector<DynamicsSeries>& series_set) {
  auto out = open_out(path);
  out << "variant,early_stop_epoch,fitted_known,unfitted_known,fitted_unknown,unfitted_unknown\n";
  for (const auto& series : series_set) {
    const int early = detect_early_stop(series);
    const auto& row = series.rows.at(static_cast<std::size_t>(early - 1));
    const double d = series.d_size == 0 ? 1.0 : series.d_size;
    out << series.variant_name << ',' << early << ',' << fmt(row.n_kn / d) << ','
        << fmt((series.known_size - row.n_kn) / d) << ',' << fmt(row.n_unk / d) << ','
        << fmt((series.unknown_size - row.n_unk) / d) << '\n';
  }
}

void write_ptrue_curve_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& curve) {
  auto out = open_out(path);
  out << "threshold,fraction_unknown,accuracy_on_unknown,n_unknown\n";
  for (const auto& p : curve)
    out << fmt(p.threshold) << ',' << fmt(p.fraction_unknown) << ',' << fmt(p.accuracy_on_unknown)
        << ',' << p.n_unknown << '\n';
}

void write_regression_scatter_csv(const std::filesystem::path& path,
                                  const std::vector<RegressionPoint>& points, const LinearFit& fit) {
  auto out = open_out(path);
  out << "# beta0=" << fmt(fit.beta0) << " beta_kn=" << fmt(fit.beta_kn)
      << " beta_unk=" << fmt(fit.beta_unk) << " r_squared=" << fmt(fit.r_squared)
      << " n_points=" << fit.n_points << '\n';
  out << "accuracy,n_kn_frac,n_unk_frac,predicted\n";
  for (const auto& p : points) {
    const double kn = p.n_kn / p.d_size;
    const double unk = p.n_unk / p.d_size;
    const double pred = fit.beta0 + fit.beta_kn * kn + fit.beta_unk * unk;
    out << fmt(p.accuracy) << ',' << fmt(kn) << ',' << fmt(unk) << ',' << fmt(pred) << '\n';
  }
}

}  // namespace slick
