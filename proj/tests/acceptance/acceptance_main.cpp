// Acceptance suite: one check block per release criterion, each printing a
// single [PASS]/[FAIL] line. Exits nonzero if any criterion fails.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "slick/annotator.hpp"
#include "slick/corpus.hpp"
#include "slick/dynamics.hpp"
#include "slick/eval.hpp"
#include "slick/gateway.hpp"
#include "slick/sim.hpp"
#include "slick/stats.hpp"
#include "test_support.hpp"

using namespace slick;
using namespace slick::testing;
using nlohmann::json;

namespace {

int g_failures = 0;
std::vector<std::string> g_messages;

#define REQUIRE_OR_FAIL(cond, detail)                                          \
  do {                                                                         \
    if (!(cond)) {                                                             \
      std::ostringstream os_;                                                  \
      os_ << detail;                                                           \
      throw std::runtime_error(std::string(#cond) + " | " + os_.str());        \
    }                                                                          \
  } while (0)

void criterion(int number, const std::string& title, const std::function<void()>& body,
               double max_seconds = 0.0) {
  const auto start = std::chrono::steady_clock::now();
  try {
    body();
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (max_seconds > 0.0 && secs > max_seconds) {
      ++g_failures;
      std::printf("[FAIL] criterion %2d: %s\n        took %.1fs, budget %.0fs\n", number,
                  title.c_str(), secs, max_seconds);
    } else {
      std::printf("[PASS] criterion %2d: %s (%.1fs)\n", number, title.c_str(), secs);
    }
  } catch (const std::exception& e) {
    ++g_failures;
    std::printf("[FAIL] criterion %2d: %s\n        %s\n", number, title.c_str(), e.what());
  }
  std::fflush(stdout);
}

EndpointProfile mock_profile(int max_parallel = 8) {
  EndpointProfile p;
  p.name = "mock";
  p.model_id = "mock-model";
  p.max_parallel = max_parallel;
  p.max_retries = 0;
  p.backoff_base_s = 0.001;
  return p;
}

std::vector<QAPair> make_dev_pool(const std::string& relation, int n) {
  std::vector<QAPair> pool;
  for (int i = 0; i < n; ++i)
    pool.push_back(make_pair(relation + "-dev-" + std::to_string(i), relation,
                             relation + " dev question " + std::to_string(i) + "?",
                             "dev answer " + std::to_string(i), Split::dev));
  return pool;
}

// Independent Hamilton apportionment used as the oracle for criterion 3.
// Deliberately written over index vectors rather than keyed maps.
std::vector<int> hamilton_oracle(int total, const std::vector<double>& weights) {
  double wsum = 0;
  for (double w : weights) wsum += w;
  std::vector<int> out(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> rema;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double q = total * weights[i] / wsum;
    out[i] = static_cast<int>(q);
    assigned += out[i];
    rema.emplace_back(-(q - out[i]), i);  // negative so ascending sort = descending remainder
  }
  std::stable_sort(rema.begin(), rema.end());
  for (std::size_t i = 0; assigned < total; ++assigned, ++i) out[rema[i].second] += 1;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

static void criterion_1_category_oracle() {
  // exhaustive partition over all (greedy <= 10, sampled <= 160) count pairs
  for (int greedy = 0; greedy <= 10; ++greedy) {
    for (int sampled = 0; sampled <= 160; ++sampled) {
      const auto cat = assign_category({greedy, 10, sampled, 160});
      int matches = 0;
      if (greedy == 10) matches += cat == KnowledgeCategory::HighlyKnown;
      if (greedy > 0 && greedy < 10) matches += cat == KnowledgeCategory::MaybeKnown;
      if (greedy == 0 && sampled > 0) matches += cat == KnowledgeCategory::WeaklyKnown;
      if (greedy == 0 && sampled == 0) matches += cat == KnowledgeCategory::Unknown;
      REQUIRE_OR_FAIL(matches == 1, "partition violated at (" << greedy << "," << sampled << ")");
    }
  }

  // >= 1000 randomized knowledge tables, pipeline vs brute-force oracle
  Rng rng(20240901);
  const auto policy = [] {
    SamplingPolicy p;
    p.rng_seed = 11;
    return p;
  }();
  const auto pool = make_dev_pool("P9", 9);
  const auto sets = sample_exemplar_sets(pool, "P9", policy);
  const auto matcher = em_matcher();
  int trials = 0;
  for (; trials < 1000; ++trials) {
    const std::string question = "probe " + std::to_string(trials) + "?";
    const auto target = make_pair("t" + std::to_string(trials), "P9", question, "gold");
    MockBackend::Distribution dist;
    const double roll = rng.next_double();
    if (roll < 0.15) {
      dist["gold"] = 1.0;
    } else if (roll < 0.3) {
      dist["wrong"] = 1.0;
    } else {
      const double p_gold = rng.next_double();
      dist["gold"] = p_gold;
      const double p_w1 = (1.0 - p_gold) * rng.next_double();
      if (p_w1 > 0) dist["wrong one"] = p_w1;
      dist["wrong two"] = 1.0 - p_gold - p_w1;
    }
    auto backend = std::make_shared<MockBackend>(
        std::map<std::string, MockBackend::Distribution>{{question, dist}}, rng.next_u64());
    Gateway gateway(mock_profile(), backend);
    const auto est = estimate_p_correct(target, sets, policy, gateway, nullptr, matcher);
    const auto oracle = oracle_categorize(target, sets, policy, *backend, matcher);
    REQUIRE_OR_FAIL(est.greedy_correct == oracle.greedy_correct,
                    "greedy mismatch on trial " << trials);
    REQUIRE_OR_FAIL(est.sampled_correct == oracle.sampled_correct,
                    "sampled mismatch on trial " << trials);
    REQUIRE_OR_FAIL(assign_category(est) == oracle.category, "category mismatch on trial " << trials);
  }
  REQUIRE_OR_FAIL(trials >= 1000, "insufficient trials");
}

static void criterion_2_annotation_cost_and_resume() {
  // 20-pair fixture with a mixed-knowledge mock
  std::map<std::string, MockBackend::Distribution> table;
  std::vector<QAPair> corpus;
  for (int i = 0; i < 20; ++i) {
    auto p = make_pair("P5-train-" + std::to_string(i), "P5", "fact " + std::to_string(i) + "?",
                       "gold " + std::to_string(i));
    if (i % 3 == 0)
      table[p.question] = {{p.gold_answers.front(), 1.0}};
    else if (i % 3 == 1)
      table[p.question] = {{p.gold_answers.front(), 0.4}, {"decoy", 0.6}};
    else
      table[p.question] = {{"decoy", 1.0}};
    corpus.push_back(std::move(p));
  }
  const auto dev_pool = make_dev_pool("P5", 10);
  SamplingPolicy policy;
  policy.rng_seed = 31;

  // cold-cache run: exactly 20 x 170 generations
  auto mock_a = std::make_shared<MockBackend>(table, 99);
  Gateway gw_a(mock_profile(), mock_a);
  const auto dir_a = fresh_dir("acc2_a");
  CacheStore cache_a(dir_a / "cache");
  const auto run_a = annotate_dataset(corpus, dev_pool, policy, gw_a, &cache_a);
  REQUIRE_OR_FAIL(run_a.failures.empty(), "uninterrupted run failed");
  REQUIRE_OR_FAIL(mock_a->total_generations() == 20 * 170,
                  "expected 3400 generations, got " << mock_a->total_generations());
  write_annotation_manifest(dir_a / "annotations.jsonl", run_a.examples);

  // interrupted run: inject a failure budget, then resume on the same cache
  auto mock_b = std::make_shared<MockBackend>(table, 99);
  const auto dir_b = fresh_dir("acc2_b");
  CacheStore cache_b(dir_b / "cache");
  {
    auto interrupted = std::make_shared<FailAfterBackend>(mock_b, 1700);
    Gateway gw_fail(mock_profile(), interrupted);
    const auto partial = annotate_dataset(corpus, dev_pool, policy, gw_fail, &cache_b);
    REQUIRE_OR_FAIL(!partial.failures.empty(), "interruption did not surface");
    REQUIRE_OR_FAIL(partial.examples.size() < corpus.size(), "interruption annotated everything");
  }
  const auto generations_before_resume = mock_b->total_generations();
  REQUIRE_OR_FAIL(generations_before_resume < 20 * 170, "nothing left to resume");
  Gateway gw_resume(mock_profile(), mock_b);
  const auto resumed = annotate_dataset(corpus, dev_pool, policy, gw_resume, &cache_b);
  REQUIRE_OR_FAIL(resumed.failures.empty(), "resume failed");
  // zero duplicate requests: every generation issued exactly once across runs
  REQUIRE_OR_FAIL(mock_b->total_generations() == 20 * 170,
                  "resume re-issued requests: " << mock_b->total_generations());
  write_annotation_manifest(dir_b / "annotations.jsonl", resumed.examples);
  REQUIRE_OR_FAIL(read_file(dir_a / "annotations.jsonl") == read_file(dir_b / "annotations.jsonl"),
                  "interrupted+resumed output differs from uninterrupted run");
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

static void criterion_3_mixture_invariants() {
  // three relations with uneven minima (120 / 180 / 110; bound 410 >= 400)
  std::vector<AnnotatedExample> annotated;
  int counter = 0;
  auto add_rel = [&](const std::string& rel, int per_cat) {
    for (auto cat : kAllCategories)
      for (int i = 0; i < per_cat; ++i)
        annotated.push_back(make_annotated(
            make_pair(rel + "-train-" + std::to_string(counter++), rel, "q?", "a"), cat));
  };
  add_rel("P1", 120);
  add_rel("P2", 180);
  add_rel("P3", 110);

  const int target = 400;
  const std::vector<double> mins{120, 180, 110};
  const auto slot_oracle = hamilton_oracle(target, mins);

  std::map<std::string, int> reference_marginals;
  for (double x : {0.0, 25.0, 50.0, 75.0, 100.0}) {
    MixtureSpec spec;
    spec.unknown_percent = x;
    spec.target_size = target;
    spec.seed = 520;
    const auto variant = build_mixture(annotated, spec);
    REQUIRE_OR_FAIL(static_cast<int>(variant.examples.size()) == target,
                    "size off at X=" << x << ": " << variant.examples.size());

    std::map<std::string, int> marginals;
    std::map<std::string, int> unknown_by_rel{{"P1", 0}, {"P2", 0}, {"P3", 0}};
    for (const auto& ex : variant.examples) {
      ++marginals[ex.pair.relation_id];
      if (ex.category == KnowledgeCategory::Unknown) ++unknown_by_rel[ex.pair.relation_id];
    }
    if (reference_marginals.empty()) {
      reference_marginals = marginals;
      REQUIRE_OR_FAIL(marginals.at("P1") == slot_oracle[0] && marginals.at("P2") == slot_oracle[1] &&
                          marginals.at("P3") == slot_oracle[2],
                      "slots disagree with the Hamilton oracle");
    } else {
      REQUIRE_OR_FAIL(marginals == reference_marginals, "marginals differ at X=" << x);
    }

    // realized Unknown counts match the oracle apportionment of X% of target
    const int unknown_total = static_cast<int>(std::llround(x * target / 100.0));
    const auto unknown_oracle = hamilton_oracle(
        unknown_total, {static_cast<double>(slot_oracle[0]), static_cast<double>(slot_oracle[1]),
                        static_cast<double>(slot_oracle[2])});
    REQUIRE_OR_FAIL(unknown_by_rel.at("P1") == unknown_oracle[0] &&
                        unknown_by_rel.at("P2") == unknown_oracle[1] &&
                        unknown_by_rel.at("P3") == unknown_oracle[2],
                    "unknown quota mismatch at X=" << x);

    // ablation size rule: |D_Known| = |D| - realized Unknown count
    const auto ablated = build_known_ablation(variant);
    REQUIRE_OR_FAIL(static_cast<int>(ablated.examples.size()) == target - unknown_total,
                    "ablation size off at X=" << x);
    if (x == 25.0)
      REQUIRE_OR_FAIL(ablated.examples.size() == 300, "25% of 400 must ablate to 300");
  }
}

static void criterion_4_regression_recovery() {
  // noiseless planted model over a grid
  std::vector<RegressionPoint> grid;
  for (int i = 0; i <= 9; ++i)
    for (int j = 0; j <= 9; ++j) {
      RegressionPoint p;
      p.d_size = 90;
      p.n_kn = 10.0 * i;
      p.n_unk = 10.0 * j;
      p.accuracy = 0.40 + 0.30 * (p.n_kn / p.d_size) - 0.30 * (p.n_unk / p.d_size);
      grid.push_back(p);
    }
  const auto clean = fit_linear_model(grid);
  REQUIRE_OR_FAIL(std::abs(clean.beta0 - 0.40) <= 1e-9 && std::abs(clean.beta_kn - 0.30) <= 1e-9 &&
                      std::abs(clean.beta_unk + 0.30) <= 1e-9,
                  "noiseless coefficients off: " << clean.beta0 << " " << clean.beta_kn << " "
                                                 << clean.beta_unk);
  REQUIRE_OR_FAIL(std::abs(clean.r_squared - 1.0) <= 1e-12, "noiseless R^2 != 1");

  // sigma = 0.01 over 200 points
  Rng rng(8080);
  std::vector<RegressionPoint> noisy;
  for (int i = 0; i < 200; ++i) {
    RegressionPoint p;
    p.d_size = 400;
    p.n_kn = rng.next_below(401);
    p.n_unk = rng.next_below(401);
    const double u1 = rng.next_double() + 1e-12;
    const double u2 = rng.next_double();
    const double noise = 0.01 * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    p.accuracy = 0.40 + 0.30 * (p.n_kn / p.d_size) - 0.30 * (p.n_unk / p.d_size) + noise;
    noisy.push_back(p);
  }
  const auto fit = fit_linear_model(noisy);
  REQUIRE_OR_FAIL(std::abs(fit.beta0 - 0.40) <= 0.05 && std::abs(fit.beta_kn - 0.30) <= 0.05 &&
                      std::abs(fit.beta_unk + 0.30) <= 0.05,
                  "noisy coefficients off");
  REQUIRE_OR_FAIL(fit.r_squared >= 0.95, "noisy R^2 " << fit.r_squared << " < 0.95");

  // residual orthogonality on the noisy fit
  double scale = 0.0;
  for (const auto& p : noisy) scale = std::max(scale, std::abs(p.accuracy));
  double max_dot = 0.0;
  for (int col = 0; col < 3; ++col) {
    double dot = 0.0;
    for (const auto& p : noisy) {
      const double x[] = {1.0, p.n_kn / p.d_size, p.n_unk / p.d_size};
      const double pred = fit.beta0 + fit.beta_kn * x[1] + fit.beta_unk * x[2];
      dot += x[col] * (p.accuracy - pred);
    }
    max_dot = std::max(max_dot, std::abs(dot));
  }
  REQUIRE_OR_FAIL(max_dot <= 1e-8 * std::max(1.0, scale) * noisy.size(),
                  "residuals not orthogonal: " << max_dot);
}

static void criterion_5_statistics() {
  // 25 constructed difference vectors vs the quadrature oracle
  Rng rng(42424);
  for (int c = 0; c < 25; ++c) {
    const int n = 20 + static_cast<int>(rng.next_below(181));
    const double mean = (rng.next_double() - 0.5) * 0.2;
    const double spread = 0.005 + rng.next_double() * 0.1;
    std::vector<double> diffs;
    for (int i = 0; i < n; ++i)
      diffs.push_back(mean + spread * (i % 2 == 0 ? 1.0 : -1.0) +
                      0.3 * spread * (static_cast<double>(i) / n - 0.5));
    const auto report = paired_t_from_differences(diffs);

    // hand formula for t
    double m = 0;
    for (double d : diffs) m += d;
    m /= n;
    double v = 0;
    for (double d : diffs) v += (d - m) * (d - m);
    v /= n - 1;
    const double t_hand = m / std::sqrt(v / n);
    REQUIRE_OR_FAIL(std::abs(report.t_statistic - t_hand) <= 1e-9, "t mismatch on case " << c);
    const double p_oracle = t_two_sided_p_oracle(t_hand, n - 1);
    REQUIRE_OR_FAIL(std::abs(report.p_value - p_oracle) <= 1e-8,
                    "p mismatch on case " << c << ": " << report.p_value << " vs " << p_oracle);
  }

  // identical prediction sets give p = 1
  std::map<std::string, std::vector<std::string>> gold;
  std::vector<PredictionRecord> preds;
  for (int i = 0; i < 1030; ++i) {
    const std::string id = "id" + std::to_string(i);
    gold[id] = {"gold"};
    preds.push_back({id, i % 4 == 0 ? "gold" : "miss", Split::test, ""});
  }
  const auto same = paired_t_test(preds, preds, gold, 100, 9);
  REQUIRE_OR_FAIL(same.t_statistic == 0.0 && same.p_value == 1.0, "identical sets not p=1");

  // partition property: replicate the documented shuffle+cut and verify
  // disjoint cover with sizes in {10, 11} for 1030 ids over 100 subsets
  std::vector<std::string> ids;
  for (const auto& [id, g] : gold) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  Rng shuffle_rng(9);
  shuffle_rng.shuffle(ids);
  std::set<std::string> seen;
  std::size_t cursor = 0;
  for (int s = 0; s < 100; ++s) {
    const int size = 1030 / 100 + (s < 1030 % 100 ? 1 : 0);
    REQUIRE_OR_FAIL(size == 10 || size == 11, "subset size " << size);
    for (int i = 0; i < size; ++i, ++cursor) seen.insert(ids[cursor]);
  }
  REQUIRE_OR_FAIL(cursor == ids.size() && seen.size() == 1030, "partition does not cover all ids");
}

static void criterion_6_em_suite() {
  // 50-case normalization / matching fixture
  struct NormCase {
    const char* input;
    const char* expected;
  };
  const NormCase norm_cases[] = {
      {"France", "france"},
      {"FRANCE", "france"},
      {"The Hague.", "hague"},
      {"  New   York ", "new york"},
      {"a cappella", "cappella"},
      {"An Officer", "officer"},
      {"the the the", ""},
      {"U.S.A.", "usa"},
      {"mother-in-law", "motherinlaw"},
      {"O'Brien", "obrien"},
      {"\"quoted\"", "quoted"},
      {"semi;colon", "semicolon"},
      {"comma, separated, list", "comma separated list"},
      {"tab\tseparated", "tab separated"},
      {"newline\nseparated", "newline separated"},
      {"(parenthetical)", "parenthetical"},
      {"[bracketed]", "bracketed"},
      {"{braced}", "braced"},
      {"question?", "question"},
      {"exclaim!", "exclaim"},
      {"percent%sign", "percentsign"},
      {"ampers&and", "ampersand"},
      {"a", ""},
      {"an", ""},
      {"the", ""},
      {"theatre", "theatre"},
      {"another", "another"},
      {"thorn", "thorn"},
      {"", ""},
      {"   ", ""},
      {"A An The", ""},
      {"1,000,000", "1000000"},
      {"3.14159", "314159"},
      {"café", "café"},
      {"São Paulo", "são paulo"},
      {"“curly quotes”", "curly quotes"},
      {"em—dash", "emdash"},
      {"en–dash", "endash"},
      {"ellipsis…", "ellipsis"},
      {"guillemets «inside»", "guillemets inside"},
  };
  int cases = 0;
  for (const auto& c : norm_cases) {
    REQUIRE_OR_FAIL(normalize_answer(c.input) == c.expected,
                    "normalize(\"" << c.input << "\") = \"" << normalize_answer(c.input)
                                   << "\", want \"" << c.expected << "\"");
    ++cases;
  }
  struct MatchCase {
    const char* predicted;
    const char* gold;
    bool expected;
  };
  const MatchCase match_cases[] = {
      {"france", "France", true},
      {"Paris", "France", false},
      {"the geneticist", "geneticist", true},
      {"geneticist.", "geneticist", true},
      {"GENETICIST", "geneticist", true},
      {"a geneticist", "geneticist", true},
      {"genet icist", "geneticist", false},
      {"New York", "new    york", true},
      {"York New", "new york", false},
      {"Smith, John", "smith john", true},
  };
  for (const auto& c : match_cases) {
    REQUIRE_OR_FAIL(exact_match(c.predicted, {c.gold}) == c.expected,
                    "exact_match(\"" << c.predicted << "\", \"" << c.gold << "\")");
    ++cases;
  }
  REQUIRE_OR_FAIL(cases == 50, "fixture table has " << cases << " cases, want 50");

  // idempotence over random strings
  Rng rng(606060);
  const std::string alphabet = "abcXYZ .,!?'-\"()0123456789 the an a";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const auto len = rng.next_below(32);
    for (std::uint64_t k = 0; k < len; ++k) s += alphabet[rng.next_below(alphabet.size())];
    const auto once = normalize_answer(s);
    REQUIRE_OR_FAIL(normalize_answer(once) == once, "not idempotent on \"" << s << "\"");
  }
}

static void criterion_7_end_to_end_mock_study() {
  // synthetic corpus: 3 relations x 40 train pairs with controlled knowledge
  std::map<std::string, MockBackend::Distribution> table;
  std::vector<QAPair> corpus;
  std::vector<QAPair> dev_pool;
  std::vector<QAPair> dev_split, test_split;
  int serial = 0;
  for (const std::string rel : {"R1", "R2", "R3"}) {
    for (int i = 0; i < 40; ++i) {
      auto p = make_pair(rel + "-train-" + std::to_string(i), rel,
                         rel + " fact " + std::to_string(i) + "?", "gold " + std::to_string(serial++));
      table[p.question] = i % 2 == 0 ? MockBackend::Distribution{{p.gold_answers.front(), 1.0}}
                                     : MockBackend::Distribution{{"decoy", 1.0}};
      corpus.push_back(std::move(p));
    }
    auto pool = make_dev_pool(rel, 8);
    dev_pool.insert(dev_pool.end(), pool.begin(), pool.end());
    for (int i = 0; i < 10; ++i) {
      dev_split.push_back(make_pair(rel + "-devx-" + std::to_string(i), rel,
                                    rel + " dev probe " + std::to_string(i) + "?",
                                    "dev gold " + std::to_string(i), Split::dev));
      test_split.push_back(make_pair(rel + "-test-" + std::to_string(i), rel,
                                     rel + " test probe " + std::to_string(i) + "?",
                                     "test gold " + std::to_string(i), Split::test));
    }
  }

  // annotate
  auto mock = std::make_shared<MockBackend>(table, 2024);
  Gateway gateway(mock_profile(), mock);
  SamplingPolicy policy;
  policy.rng_seed = 17;
  const auto run = annotate_dataset(corpus, dev_pool, policy, gateway, nullptr);
  REQUIRE_OR_FAIL(run.failures.empty(), "annotation failed");
  const int known_total = run.stats.total - run.stats.overall[category_index(KnowledgeCategory::Unknown)];
  REQUIRE_OR_FAIL(known_total == 60, "expected 60 Known, got " << known_total);

  // build mixtures X in {0, 50, 100}
  CorpusManifest manifest;
  manifest.pairs = corpus;
  manifest.pairs.insert(manifest.pairs.end(), dev_split.begin(), dev_split.end());
  manifest.pairs.insert(manifest.pairs.end(), test_split.begin(), test_split.end());

  const auto snap_root = fresh_dir("acc7");
  SimConfig sim_config;
  sim_config.epochs = 14;
  sim_config.fit_prob_known = 0.5;
  sim_config.fit_prob_unknown = 0.05;
  sim_config.beta0 = 0.32;
  sim_config.beta_kn = 0.34;
  sim_config.beta_unk = -0.28;
  sim_config.seed = 77;

  std::vector<DynamicsSeries> all_series;
  for (double x : {0.0, 50.0, 100.0}) {
    MixtureSpec spec;
    spec.unknown_percent = x;
    spec.target_size = 48;
    spec.seed = 99;
    spec.slot_rule = SlotRule::min_known_unknown;  // the mock cannot mint MaybeKnown
    auto variant = build_mixture(run.examples, spec);
    REQUIRE_OR_FAIL(static_cast<int>(variant.examples.size()) == 48, "variant size");
    simulate_snapshots(variant, manifest, sim_config, snap_root);
    const auto snapshots = ingest_snapshots(snap_root / variant.name, variant, manifest);
    auto series = compute_series(snapshots, variant, manifest);

    // (a) Known fitted at least as fast as Unknown at every epoch
    for (const auto& row : series.rows) {
      const double kn_rate =
          series.known_size == 0 ? 1.0 : static_cast<double>(row.n_kn) / series.known_size;
      const double unk_rate =
          series.unknown_size == 0 ? 0.0 : static_cast<double>(row.n_unk) / series.unknown_size;
      REQUIRE_OR_FAIL(kn_rate >= unk_rate, "fit-rate ordering broken at epoch "
                                               << row.epoch << " of " << series.variant_name);
    }

    // (c) early stop = earliest argmax of dev accuracy
    const int early = detect_early_stop(series);
    int best = 0;
    for (const auto& row : series.rows) best = std::max(best, row.dev_correct);
    REQUIRE_OR_FAIL(series.rows[early - 1].dev_correct == best, "early stop not at max");
    for (const auto& row : series.rows) {
      if (row.epoch >= early) break;
      REQUIRE_OR_FAIL(row.dev_correct < best, "earlier epoch ties the max; earliest-tie rule broken");
    }
    all_series.push_back(std::move(series));
  }

  // (b) fitted coefficient signs match the planted coupling
  const auto points = collect_regression_points(all_series);
  REQUIRE_OR_FAIL(points.size() == 3 * 14, "expected 42 regression points");
  const auto fit = fit_linear_model(points);
  REQUIRE_OR_FAIL(fit.beta_kn > 0, "beta_kn " << fit.beta_kn << " not positive");
  REQUIRE_OR_FAIL(fit.beta_unk < 0, "beta_unk " << fit.beta_unk << " not negative");
  REQUIRE_OR_FAIL(fit.r_squared > 0.8, "coupling fit weak: R^2 " << fit.r_squared);
  std::filesystem::remove_all(snap_root);
}

static void criterion_8_ptrue_sweep() {
  // prompt bytes verbatim
  REQUIRE_OR_FAIL(build_ptrue_prompt("Where is Paris located?", "France") ==
                      "Question: Where is Paris located?\nProposed Answer: France\n"
                      "Is the proposed answer:\n(A) True\n(B) False\nThe proposed answer is:",
                  "probe prompt bytes changed");

  Rng rng(31415);
  std::vector<PTrueRecord> records;
  std::map<std::string, bool> correct;
  for (int i = 0; i < 120; ++i) {
    const std::string id = "id" + std::to_string(i);
    records.push_back({id, static_cast<double>(rng.next_below(21)) / 20.0, 20});
    correct[id] = rng.next_double() < 0.35;
  }
  const auto curve = ptrue_threshold_sweep(records, correct);
  REQUIRE_OR_FAIL(curve.front().threshold == 0.0 && curve.front().fraction_unknown == 0.0,
                  "threshold 0 must classify nothing");

  double prev = -1.0;
  for (const auto& point : curve) {
    int n_unknown = 0, n_right = 0;
    for (const auto& r : records) {
      if (r.p_true < point.threshold) {
        ++n_unknown;
        if (correct.at(r.example_id)) ++n_right;
      }
    }
    REQUIRE_OR_FAIL(point.n_unknown == n_unknown, "point disagrees with enumeration");
    REQUIRE_OR_FAIL(std::abs(point.fraction_unknown - n_unknown / 120.0) < 1e-15, "fraction off");
    const double want_acc = n_unknown == 0 ? 0.0 : static_cast<double>(n_right) / n_unknown;
    REQUIRE_OR_FAIL(std::abs(point.accuracy_on_unknown - want_acc) < 1e-15, "accuracy off");
    REQUIRE_OR_FAIL(point.fraction_unknown >= prev, "fraction not monotone in threshold");
    prev = point.fraction_unknown;
  }
}

static void criterion_9_export_format() {
  DatasetVariant variant;
  variant.name = "D_fmt";
  variant.seed = 5;
  variant.spec = json{{"kind", "fixture"}};
  VariantExample a;
  a.pair = make_pair("P106-train-00000", "P106", "What kind of work does Ron Konopka do?",
                     "geneticist", Split::train, "Ron Konopka");
  a.target_answer = "geneticist";
  a.category = KnowledgeCategory::HighlyKnown;
  VariantExample b;
  b.pair = make_pair("P106-train-00001", "P106", "What kind of work does Mira Voss do?", "falconer",
                     Split::train, "Mira Voss");
  b.target_answer = "falconer";
  b.category = KnowledgeCategory::Unknown;
  variant.examples = {a, b};

  CorpusManifest manifest;
  const auto dir = fresh_dir("acc9");
  export_trainer_files(variant, manifest, dir);
  const std::string train = read_file(dir / "train.jsonl");
  const std::string first_line = train.substr(0, train.find('\n'));
  REQUIRE_OR_FAIL(
      first_line ==
          R"({"id":"P106-train-00000","input":"Answer the following question.\nWhat kind of work does Ron Konopka do?","target":"geneticist"})",
      "trainer record bytes changed: " << first_line);

  // IDK relabeling: Unknown target becomes the abstention string, input unchanged
  const auto idk = build_idk_variant(variant);
  const auto idk_dir = fresh_dir("acc9_idk");
  export_trainer_files(idk, manifest, idk_dir);
  const std::string idk_train = read_file(idk_dir / "train.jsonl");
  const std::string second_line = idk_train.substr(idk_train.find('\n') + 1);
  REQUIRE_OR_FAIL(
      second_line ==
          "{\"id\":\"P106-train-00001\",\"input\":\"Answer the following question.\\nWhat kind of "
          "work does Mira Voss do?\",\"target\":\"I don't know\"}\n",
      "idk record bytes changed: " << second_line);

  // export -> import round trip is an identity
  const auto loaded = load_variant(dir);
  REQUIRE_OR_FAIL(loaded.name == variant.name && loaded.seed == variant.seed &&
                      loaded.spec == variant.spec && loaded.examples.size() == 2,
                  "round trip lost variant metadata");
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE_OR_FAIL(loaded.examples[i].pair.id == variant.examples[i].pair.id &&
                        loaded.examples[i].pair.question == variant.examples[i].pair.question &&
                        loaded.examples[i].pair.subject == variant.examples[i].pair.subject &&
                        loaded.examples[i].target_answer == variant.examples[i].target_answer &&
                        loaded.examples[i].category == variant.examples[i].category,
                    "round trip altered example " << i);
  }
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(idk_dir);
}

static void criterion_10_determinism() {
  const std::string cli = SLICK_CLI_PATH;
  const std::string sim = SLICK_SIM_PATH;
  const std::string source = SLICK_SOURCE_DIR;
  const auto root = fresh_dir("acc10");

  auto run_demo = [&](const std::string& out) {
    const std::string cmd = "SLICK_CLI=" + cli + " SLICK_SIM=" + sim + " bash " + source +
                            "/tools/demo.sh " + source + " " + out + " >" + out + ".log 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE_OR_FAIL(WIFEXITED(status) && WEXITSTATUS(status) == 0,
                    "demo run failed, see " << out << ".log");
  };
  // two executions into the same output path; the first run's bytes are
  // snapshotted before the demo script wipes and rewrites the directory
  const auto out = root / "run";
  run_demo(out.string());
  std::map<std::filesystem::path, std::string> first_run;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), out);
    // the cache directory is excluded: entries carry created_at timestamps
    if (rel.begin()->string() == "cache") continue;
    first_run[rel] = read_file(entry.path());
  }
  REQUIRE_OR_FAIL(first_run.size() > 50, "demo produced too few files: " << first_run.size());

  run_demo(out.string());
  std::size_t seen = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), out);
    if (rel.begin()->string() == "cache") continue;
    const auto it = first_run.find(rel);
    REQUIRE_OR_FAIL(it != first_run.end(), "second run created extra file " << rel);
    REQUIRE_OR_FAIL(read_file(entry.path()) == it->second, "outputs differ at " << rel);
    ++seen;
  }
  REQUIRE_OR_FAIL(seen == first_run.size(), "second run is missing files");
  std::filesystem::remove_all(root);
}

int main() {
  const auto start = std::chrono::steady_clock::now();

  criterion(1, "category assignment matches the brute-force oracle; categories partition",
            criterion_1_category_oracle, 60.0);
  criterion(2, "annotation costs exactly 170 generations per pair and resumes without duplicates",
            criterion_2_annotation_cost_and_resume);
  criterion(3, "mixture variants keep relation marginals fixed and match the quota oracle",
            criterion_3_mixture_invariants);
  criterion(4, "linear model recovery: exact on clean data, within tolerance under noise",
            criterion_4_regression_recovery);
  criterion(5, "paired t-test matches quadrature oracle; partition is exact",
            criterion_5_statistics);
  criterion(6, "exact-match suite: 50-case table plus idempotence property",
            criterion_6_em_suite);
  criterion(7, "end-to-end mock study reproduces the qualitative dynamics",
            criterion_7_end_to_end_mock_study, 120.0);
  criterion(8, "probe-threshold sweep equals exhaustive enumeration; prompt bytes pinned",
            criterion_8_ptrue_sweep);
  criterion(9, "trainer export format is byte-exact and round-trips",
            criterion_9_export_format);
  criterion(10, "demo pipeline is byte-reproducible across two executions",
            criterion_10_determinism);

  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > 300.0) {
    ++g_failures;
    std::printf("[FAIL] overall runtime %.1fs exceeds the 300s budget\n", secs);
  }
  std::printf("%s: %d/10 criteria passed in %.1fs\n", g_failures == 0 ? "OK" : "FAILURES",
              10 - g_failures, secs);
  return g_failures == 0 ? 0 : 1;
}
