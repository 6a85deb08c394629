// slick: categorize closed-book QA facts against a model's knowledge via
// sampling, build controlled fine-tuning dataset variants, and analyze
// fine-tuning dynamics from per-epoch prediction snapshots.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slick/annotator.hpp"
#include "slick/corpus.hpp"
#include "slick/digest.hpp"
#include "slick/dynamics.hpp"
#include "slick/eval.hpp"
#include "slick/gateway.hpp"
#include "slick/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.2.0";

struct EndpointOptions {
  std::string kind = "mock";  // mock | http
  std::string mock_table;
  std::uint64_t mock_seed = 0;
  std::string base_url;
  std::string model_id = "model";
  std::string auth_env;
  int max_parallel = 4;
  int max_retries = 3;
  double timeout_s = 30.0;
  double backoff_s = 0.25;
};

void add_endpoint_options(CLI::App* cmd, EndpointOptions& opts) {
  cmd->add_option("--endpoint", opts.kind, "Backend kind: mock or http")
      ->check(CLI::IsMember({"mock", "http"}))
      ->capture_default_str();
  cmd->add_option("--mock-table", opts.mock_table, "Mock knowledge table JSON");
  cmd->add_option("--mock-seed", opts.mock_seed, "Mock backend seed")->capture_default_str();
  cmd->add_option("--base-url", opts.base_url, "HTTP endpoint base URL");
  cmd->add_option("--model", opts.model_id, "Model identifier sent to the endpoint")
      ->capture_default_str();
  cmd->add_option("--auth-env", opts.auth_env, "Env var holding the bearer token");
  cmd->add_option("--max-parallel", opts.max_parallel, "Max in-flight requests")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-retries", opts.max_retries, "Retries on transient failures")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--timeout", opts.timeout_s, "Request timeout in seconds")
      ->capture_default_str();
  cmd->add_option("--backoff", opts.backoff_s, "Base backoff in seconds")->capture_default_str();
}

slick::Gateway make_gateway(const EndpointOptions& opts) {
  slick::EndpointProfile profile;
  profile.name = opts.kind;
  profile.base_url = opts.base_url;
  profile.model_id = opts.model_id;
  profile.auth_token_ref = opts.auth_env;
  profile.request_timeout_s = opts.timeout_s;
  profile.max_parallel = opts.max_parallel;
  profile.max_retries = opts.max_retries;
  profile.backoff_base_s = opts.backoff_s;

  std::shared_ptr<slick::Backend> backend;
  if (opts.kind == "mock") {
    if (opts.mock_table.empty())
      throw slick::Error(slick::errkind::ConfigError, "--mock-table is required for the mock endpoint");
    backend = slick::MockBackend::from_json_file(opts.mock_table, opts.mock_seed);
  } else {
    if (profile.base_url.empty())
      throw slick::Error(slick::errkind::ConfigError, "--base-url is required for the http endpoint");
    backend = std::make_shared<slick::HttpBackend>(profile);
  }
  return slick::Gateway(profile, std::move(backend));
}

// Provenance: effective config and a manifest of inputs go into every output
// directory. No timestamps, so reruns are byte-identical.
void write_run_provenance(const fs::path& out_dir, const std::string& subcommand,
                          const CLI::App& app, const std::vector<std::string>& inputs) {
  fs::create_directories(out_dir);
  const std::string config_text = app.config_to_str(true, false);
  {
    std::ofstream out(out_dir / ("effective_config_" + subcommand + ".toml"));
    out << config_text;
  }
  json manifest{{"subcommand", subcommand},
                {"inputs", inputs},
                {"config_digest", slick::sha256_hex(config_text)},
                {"version", kVersion}};
  std::ofstream out(out_dir / ("run_manifest_" + subcommand + ".json"));
  out << manifest.dump(2) << '\n';
}

std::vector<slick::PredictionRecord> read_predictions(const fs::path& path, slick::Split split) {
  std::ifstream in(path);
  if (!in) throw slick::Error(slick::errkind::IoError, "cannot open " + path.string());
  std::vector<slick::PredictionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      slick::PredictionRecord r;
      r.example_id = j.at("example_id").get<std::string>();
      r.predicted = j.at("predicted").get<std::string>();
      r.source_tag = j.value("source_tag", "");
      r.split = split;
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw slick::Error(slick::errkind::ParseError,
                         path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

json eval_report_to_json(const slick::EvalReport& report) {
  json per_category = json::object();
  for (const auto& [cat, bucket] : report.per_category)
    per_category[slick::to_string(cat)] =
        json{{"n", bucket.n}, {"correct", bucket.correct}, {"accuracy", bucket.accuracy()}};
  json per_relation = json::object();
  for (const auto& [rel, bucket] : report.per_relation)
    per_relation[rel] =
        json{{"n", bucket.n}, {"correct", bucket.correct}, {"accuracy", bucket.accuracy()}};
  return json{{"n_total", report.n_total},
              {"n_correct", report.n_correct},
              {"overall_accuracy", report.overall_accuracy()},
              {"answered_fraction", report.answered_fraction()},
              {"accuracy_on_answered", report.accuracy_on_answered()},
              {"per_category", std::move(per_category)},
              {"per_relation", std::move(per_relation)}};
}

std::string eval_report_to_text(const slick::EvalReport& report) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-16s %6s %8s %10s\n", "group", "n", "correct", "accuracy");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-16s %6d %8d %10.4f\n", "overall", report.n_total,
                report.n_correct, report.overall_accuracy());
  out += buf;
  for (const auto& [cat, bucket] : report.per_category) {
    std::snprintf(buf, sizeof(buf), "%-16s %6d %8d %10.4f\n", slick::to_string(cat), bucket.n,
                  bucket.correct, bucket.accuracy());
    out += buf;
  }
  for (const auto& [rel, bucket] : report.per_relation) {
    std::snprintf(buf, sizeof(buf), "%-16s %6d %8d %10.4f\n", rel.c_str(), bucket.n, bucket.correct,
                  bucket.accuracy());
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "answered: %.4f  accuracy_on_answered: %.4f\n",
                report.answered_fraction(), report.accuracy_on_answered());
  out += buf;
  return out;
}

slick::EvalInputs eval_inputs_for_split(const slick::CorpusManifest& manifest, slick::Split split,
                                        const std::vector<slick::AnnotatedExample>& annotations) {
  slick::EvalInputs inputs;
  for (const auto& p : manifest.pairs) {
    if (p.split != split) continue;
    inputs.gold_by_id[p.id] = p.gold_answers;
    inputs.relation_by_id[p.id] = p.relation_id;
    inputs.expected_ids.push_back(p.id);
  }
  for (const auto& a : annotations)
    if (inputs.gold_by_id.count(a.pair.id)) inputs.category_by_id[a.pair.id] = a.category;
  return inputs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-book QA knowledge categorization and fine-tuning dynamics toolkit"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Config file (TOML; flags override file values)");
  app.require_subcommand(1);

  bool error_json = false;
  std::uint64_t global_seed = 0;
  app.add_flag("--error-json", error_json, "Print machine-readable error JSON on failure");
  app.add_option("--seed", global_seed, "Global seed inherited by randomized stages")
      ->capture_default_str();

  // ---- import ----
  auto* cmd_import = app.add_subcommand("import", "Import a raw corpus and apply preprocessing filters");
  std::string imp_raw, imp_relations, imp_out;
  cmd_import->add_option("--raw", imp_raw, "Raw corpus root ({split}/{relation}.jsonl)")->required();
  cmd_import->add_option("--relations", imp_relations, "Relation config JSON")->required();
  cmd_import->add_option("--out", imp_out, "Output corpus manifest JSON")->required();

  // ---- annotate ----
  auto* cmd_annotate = app.add_subcommand("annotate", "Categorize pairs against the model's knowledge");
  std::string ann_manifest, ann_out_dir, ann_cache;
  std::vector<std::string> ann_splits{"train", "dev", "test", "ood_test"};
  EndpointOptions ann_endpoint;
  slick::SamplingPolicy ann_policy;
  cmd_annotate->add_option("--manifest", ann_manifest, "Corpus manifest JSON")->required();
  cmd_annotate->add_option("--out-dir", ann_out_dir, "Output directory")->required();
  cmd_annotate->add_option("--cache", ann_cache, "Response cache directory (empty = no cache)");
  cmd_annotate->add_option("--splits", ann_splits, "Splits to annotate")->delimiter(',');
  add_endpoint_options(cmd_annotate, ann_endpoint);
  cmd_annotate->add_option("--n-exemplar-sets", ann_policy.n_exemplar_sets)->capture_default_str();
  cmd_annotate->add_option("--k-shot", ann_policy.k_shot)->capture_default_str();
  cmd_annotate->add_option("--n-samples", ann_policy.n_samples)->capture_default_str();
  cmd_annotate->add_option("--temperature", ann_policy.sample_temperature)->capture_default_str();
  cmd_annotate->add_option("--top-k", ann_policy.top_k)->capture_default_str();
  cmd_annotate->add_option("--max-tokens", ann_policy.max_tokens)->capture_default_str();

  // ---- build ----
  auto* cmd_build = app.add_subcommand("build", "Construct a fine-tuning dataset variant");
  std::string bld_manifest, bld_annotations, bld_out, bld_kind = "mixture", bld_category,
              bld_known_mix = "natural", bld_base_variant, bld_name;
  std::string bld_abstain = slick::kDefaultAbstainString;
  double bld_unknown_percent = 0.0;
  int bld_target_size = 0;
  cmd_build->add_option("--manifest", bld_manifest, "Corpus manifest JSON");
  cmd_build->add_option("--annotations", bld_annotations, "Annotation manifest JSONL");
  cmd_build->add_option("--out", bld_out, "Output variant JSON")->required();
  cmd_build->add_option("--kind", bld_kind, "mixture | category | natural | known-ablation | idk")
      ->check(CLI::IsMember({"mixture", "category", "natural", "known-ablation", "idk"}))
      ->capture_default_str();
  cmd_build->add_option("--unknown-percent", bld_unknown_percent, "X% Unknown for mixtures")
      ->check(CLI::Range(0.0, 100.0))
      ->capture_default_str();
  cmd_build->add_option("--category", bld_category,
                        "Category for --kind category (HighlyKnown/MaybeKnown/WeaklyKnown/Unknown)");
  cmd_build->add_option("--target-size", bld_target_size, "|D| (0 = fixed-size rule)")
      ->capture_default_str();
  cmd_build->add_option("--known-mix", bld_known_mix, "Known slot filling: pooled | natural")
      ->check(CLI::IsMember({"pooled", "natural"}))
      ->capture_default_str();
  std::string bld_slot_rule = "min-all";
  cmd_build->add_option("--slot-rule", bld_slot_rule,
                        "Relation slot weights: min-all | min-known-unknown")
      ->check(CLI::IsMember({"min-all", "min-known-unknown"}))
      ->capture_default_str();
  cmd_build->add_option("--base-variant", bld_base_variant, "Input variant for known-ablation/idk");
  cmd_build->add_option("--abstain", bld_abstain, "Abstention string for idk")->capture_default_str();
  cmd_build->add_option("--name", bld_name, "Override variant name");

  // ---- export ----
  auto* cmd_export = app.add_subcommand("export", "Export trainer-ready files for a variant");
  std::string exp_variant, exp_manifest, exp_out_dir;
  cmd_export->add_option("--variant", exp_variant, "Variant JSON")->required();
  cmd_export->add_option("--manifest", exp_manifest, "Corpus manifest JSON")->required();
  cmd_export->add_option("--out-dir", exp_out_dir, "Output directory")->required();

  // ---- evaluate ----
  auto* cmd_eval = app.add_subcommand("evaluate", "Exact-match evaluation with per-category breakdown");
  std::string ev_manifest, ev_annotations, ev_predictions, ev_split = "test", ev_out_dir, ev_abstain;
  cmd_eval->add_option("--manifest", ev_manifest, "Corpus manifest JSON")->required();
  cmd_eval->add_option("--annotations", ev_annotations, "Annotation manifest JSONL");
  cmd_eval->add_option("--predictions", ev_predictions, "Predictions JSONL")->required();
  cmd_eval->add_option("--split", ev_split, "Split the predictions cover")
      ->check(CLI::IsMember({"train", "dev", "test", "ood_test"}))
      ->capture_default_str();
  cmd_eval->add_option("--abstain", ev_abstain, "Abstention string (enables answered-rate)");
  cmd_eval->add_option("--out-dir", ev_out_dir, "Output directory")->required();

  // ---- dynamics ----
  auto* cmd_dyn = app.add_subcommand("dynamics", "Compute the per-epoch dynamics series");
  std::string dyn_snapshots, dyn_variant, dyn_manifest, dyn_out_dir;
  cmd_dyn->add_option("--snapshots", dyn_snapshots, "Variant snapshot dir (epoch_N/...)")->required();
  cmd_dyn->add_option("--variant", dyn_variant, "Variant JSON")->required();
  cmd_dyn->add_option("--manifest", dyn_manifest, "Corpus manifest JSON")->required();
  cmd_dyn->add_option("--out-dir", dyn_out_dir, "Output directory")->required();

  // ---- regress ----
  auto* cmd_regress = app.add_subcommand("regress", "Fit accuracy ~ fitted Known/Unknown fractions");
  std::vector<std::string> reg_series;
  std::string reg_out_dir;
  cmd_regress->add_option("--series", reg_series, "Dynamics series JSON files")->required();
  cmd_regress->add_option("--out-dir", reg_out_dir, "Output directory")->required();

  // ---- ttest ----
  auto* cmd_ttest = app.add_subcommand("ttest", "Paired significance test over two prediction sets");
  std::string tt_manifest, tt_a, tt_b, tt_out_dir;
  int tt_subsets = 100;
  cmd_ttest->add_option("--manifest", tt_manifest, "Corpus manifest JSON")->required();
  cmd_ttest->add_option("--pred-a", tt_a, "Predictions JSONL (model A)")->required();
  cmd_ttest->add_option("--pred-b", tt_b, "Predictions JSONL (model B)")->required();
  cmd_ttest->add_option("--n-subsets", tt_subsets, "Number of subsets")->capture_default_str();
  cmd_ttest->add_option("--out-dir", tt_out_dir, "Output directory")->required();

  // ---- ptrue ----
  auto* cmd_ptrue = app.add_subcommand("ptrue", "Probe P(True) for gold answers; optional threshold sweep");
  std::string pt_manifest, pt_split = "test", pt_out_dir, pt_post_ft, pt_cache;
  int pt_probes = 20;
  EndpointOptions pt_endpoint;
  cmd_ptrue->add_option("--manifest", pt_manifest, "Corpus manifest JSON")->required();
  cmd_ptrue->add_option("--split", pt_split, "Split to probe")
      ->check(CLI::IsMember({"train", "dev", "test", "ood_test"}))
      ->capture_default_str();
  cmd_ptrue->add_option("--n-probe", pt_probes, "Probe completions per pair")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_ptrue->add_option("--cache", pt_cache, "Response cache directory");
  cmd_ptrue->add_option("--post-ft-predictions", pt_post_ft,
                        "Post-fine-tuning predictions JSONL (enables the threshold sweep)");
  cmd_ptrue->add_option("--out-dir", pt_out_dir, "Output directory")->required();
  add_endpoint_options(cmd_ptrue, pt_endpoint);

  // ---- plot ----
  auto* cmd_plot = app.add_subcommand("plot", "Emit tidy CSV plot data from analysis outputs");
  std::vector<std::string> plot_series;
  std::string plot_fit, plot_curve, plot_out_dir;
  std::vector<int> plot_durations{5, 10, 20, 50};
  cmd_plot->add_option("--series", plot_series, "Dynamics series JSON files")->required();
  cmd_plot->add_option("--fit", plot_fit, "Linear fit JSON (regress output)");
  cmd_plot->add_option("--ptrue-curve", plot_curve, "Sweep JSON (ptrue output)");
  cmd_plot->add_option("--durations", plot_durations, "Fixed-epoch durations for accuracy-vs-unknown")
      ->delimiter(',')
      ->capture_default_str();
  cmd_plot->add_option("--out-dir", plot_out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints help/message
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (*cmd_import) {
      auto relations = slick::load_relation_config(imp_relations);
      auto manifest = slick::apply_filters(slick::import_raw(imp_raw, relations));
      slick::save_corpus_manifest(imp_out, manifest);
      write_run_provenance(fs::path(imp_out).parent_path(), "import", app, {imp_raw, imp_relations});
      std::cout << "imported " << manifest.pairs.size() << " pairs\n";
      for (const auto& e : manifest.filter_log)
        std::cout << "filter " << e.rule << ": removed " << e.removed << '\n';
    } else if (*cmd_annotate) {
      auto manifest = slick::load_corpus_manifest(ann_manifest);
      ann_policy.rng_seed = global_seed;
      auto gateway = make_gateway(ann_endpoint);
      std::unique_ptr<slick::CacheStore> cache;
      if (!ann_cache.empty()) cache = std::make_unique<slick::CacheStore>(ann_cache);

      std::vector<slick::QAPair> targets;
      for (const auto& split_name : ann_splits) {
        const auto split = slick::split_from_string(split_name);
        for (const auto& p : manifest.split_pairs(split)) targets.push_back(p);
      }
      // Exemplar pool: the dev split, plus the ood_test pool for relations
      // that have no dev presence (held-out relations keep no dev records).
      auto dev_pool = manifest.split_pairs(slick::Split::dev);
      std::set<std::string> dev_relations;
      for (const auto& p : dev_pool) dev_relations.insert(p.relation_id);
      for (const auto& p : manifest.split_pairs(slick::Split::ood_test))
        if (dev_relations.find(p.relation_id) == dev_relations.end()) dev_pool.push_back(p);
      auto run = slick::annotate_dataset(targets, dev_pool, ann_policy, gateway, cache.get());
      if (!run.failures.empty()) {
        std::string msg = std::to_string(run.failures.size()) + " pairs failed annotation:";
        for (std::size_t i = 0; i < run.failures.size() && i < 5; ++i)
          msg += " " + run.failures[i].pair_id + " (" + run.failures[i].kind + ")";
        throw slick::Error(slick::errkind::AnnotationIncomplete, msg);
      }
      fs::create_directories(ann_out_dir);
      slick::write_annotation_manifest(fs::path(ann_out_dir) / "annotations.jsonl", run.examples);
      {
        json stats{{"total", run.stats.total},
                   {"policy_fingerprint", run.policy_fingerprint},
                   {"overall", json::object()},
                   {"per_relation", json::object()}};
        for (auto cat : slick::kAllCategories) {
          stats["overall"][slick::to_string(cat)] =
              json{{"n", run.stats.overall[slick::category_index(cat)]},
                   {"percent", run.stats.percent(cat)}};
        }
        for (const auto& [rel, counts] : run.stats.per_relation) {
          json row = json::object();
          for (auto cat : slick::kAllCategories)
            row[slick::to_string(cat)] = counts[slick::category_index(cat)];
          stats["per_relation"][rel] = std::move(row);
        }
        const auto gw = gateway.stats();
        stats["gateway"] = json{{"backend_requests", gw.backend_requests},
                                {"backend_generations", gw.backend_generations},
                                {"cache_hits", gw.cache_hits}};
        std::ofstream out(fs::path(ann_out_dir) / "category_stats.json");
        out << stats.dump(2) << '\n';
      }
      {
        std::ofstream out(fs::path(ann_out_dir) / "category_stats.txt");
        out << slick::render_category_stats(run.stats);
      }
      write_run_provenance(ann_out_dir, "annotate", app, {ann_manifest});
      std::cout << slick::render_category_stats(run.stats);
    } else if (*cmd_build) {
      slick::DatasetVariant variant;
      if (bld_kind == "known-ablation" || bld_kind == "idk") {
        if (bld_base_variant.empty())
          throw slick::Error(slick::errkind::ConfigError, "--base-variant is required for " + bld_kind);
        const auto base = slick::load_variant_file(bld_base_variant);
        variant = bld_kind == "idk" ? slick::build_idk_variant(base, bld_abstain)
                                    : slick::build_known_ablation(base);
      } else {
        if (bld_annotations.empty())
          throw slick::Error(slick::errkind::ConfigError, "--annotations is required for " + bld_kind);
        if (bld_manifest.empty())
          throw slick::Error(slick::errkind::ConfigError, "--manifest is required for " + bld_kind);
        const auto manifest = slick::load_corpus_manifest(bld_manifest);
        std::map<std::string, const slick::QAPair*> by_id;
        for (const auto& p : manifest.pairs) by_id[p.id] = &p;

        // Annotations may cover every split; variants draw from train pairs,
        // resolved through the manifest so subject/split fields are restored.
        std::vector<slick::AnnotatedExample> annotations;
        for (auto& a : slick::read_annotation_manifest(bld_annotations)) {
          auto it = by_id.find(a.pair.id);
          if (it == by_id.end())
            throw slick::Error(slick::errkind::UnknownExample,
                               "annotated id " + a.pair.id + " not in corpus manifest");
          if (it->second->split != slick::Split::train) continue;
          a.pair = *it->second;
          annotations.push_back(std::move(a));
        }
        const auto rule = bld_slot_rule == "min-known-unknown" ? slick::SlotRule::min_known_unknown
                                                               : slick::SlotRule::min_all_categories;
        int target = bld_target_size;
        if (target == 0) {
          // default |D|: the bound the chosen slot rule supports
          const auto fixed = slick::compute_fixed_size(annotations);
          if (rule == slick::SlotRule::min_all_categories) {
            target = fixed.d_size;
          } else {
            for (const auto& row : fixed.rows) {
              const int unknown =
                  row.category_counts[slick::category_index(slick::KnowledgeCategory::Unknown)];
              int known = 0;
              for (auto cat : {slick::KnowledgeCategory::HighlyKnown,
                               slick::KnowledgeCategory::MaybeKnown,
                               slick::KnowledgeCategory::WeaklyKnown})
                known += row.category_counts[slick::category_index(cat)];
              target += std::min(known, unknown);
            }
          }
          if (target == 0)
            throw slick::Error(slick::errkind::InsufficientCategoryPool,
                               "annotated train split supports no examples under the chosen slot rule");
        }
        if (bld_kind == "mixture") {
          slick::MixtureSpec spec;
          spec.name = bld_name;
          spec.unknown_percent = bld_unknown_percent;
          spec.target_size = target;
          spec.seed = global_seed;
          spec.known_mix = bld_known_mix == "pooled" ? slick::KnownMix::pooled : slick::KnownMix::natural;
          spec.slot_rule = rule;
          variant = slick::build_mixture(annotations, spec);
        } else if (bld_kind == "category") {
          if (bld_category.empty())
            throw slick::Error(slick::errkind::ConfigError, "--category is required for --kind category");
          variant = slick::build_single_category(annotations, slick::category_from_string(bld_category),
                                                 target, global_seed);
        } else {  // natural
          variant = slick::build_natural(annotations, target, global_seed, rule);
        }
      }
      if (!bld_name.empty()) variant.name = bld_name;
      slick::save_variant(bld_out, variant);
      write_run_provenance(fs::path(bld_out).parent_path(), "build", app,
                           {bld_manifest, bld_annotations, bld_base_variant});
      std::cout << "variant " << variant.name << ": " << variant.examples.size() << " examples ("
                << variant.count(slick::KnowledgeCategory::Unknown) << " Unknown)\n";
    } else if (*cmd_export) {
      const auto variant = slick::load_variant_file(exp_variant);
      const auto manifest = slick::load_corpus_manifest(exp_manifest);
      slick::export_trainer_files(variant, manifest, exp_out_dir);
      write_run_provenance(exp_out_dir, "export", app, {exp_variant, exp_manifest});
      std::cout << "exported " << variant.examples.size() << " training records to " << exp_out_dir
                << '\n';
    } else if (*cmd_eval) {
      const auto manifest = slick::load_corpus_manifest(ev_manifest);
      std::vector<slick::AnnotatedExample> annotations;
      if (!ev_annotations.empty()) annotations = slick::read_annotation_manifest(ev_annotations);
      const auto split = slick::split_from_string(ev_split);
      auto inputs = eval_inputs_for_split(manifest, split, annotations);
      if (!ev_abstain.empty()) inputs.abstain_string = ev_abstain;
      const auto predictions = read_predictions(ev_predictions, split);
      const auto report = slick::evaluate(predictions, inputs);
      fs::create_directories(ev_out_dir);
      {
        std::ofstream out(fs::path(ev_out_dir) / "eval_report.json");
        out << eval_report_to_json(report).dump(2) << '\n';
      }
      {
        std::ofstream out(fs::path(ev_out_dir) / "eval_report.txt");
        out << eval_report_to_text(report);
      }
      write_run_provenance(ev_out_dir, "evaluate", app, {ev_manifest, ev_predictions});
      std::cout << eval_report_to_text(report);
    } else if (*cmd_dyn) {
      const auto variant = slick::load_variant_file(dyn_variant);
      const auto manifest = slick::load_corpus_manifest(dyn_manifest);
      const auto snapshots = slick::ingest_snapshots(dyn_snapshots, variant, manifest);
      const auto series = slick::compute_series(snapshots, variant, manifest);
      const int early = slick::detect_early_stop(series);
      fs::create_directories(dyn_out_dir);
      {
        json out_json = slick::series_to_json(series);
        out_json["early_stop_epoch"] = early;
        std::ofstream out(fs::path(dyn_out_dir) / "series.json");
        out << out_json.dump(2) << '\n';
      }
      slick::write_series_csv(fs::path(dyn_out_dir) / "series.csv", series);
      write_run_provenance(dyn_out_dir, "dynamics", app, {dyn_snapshots, dyn_variant, dyn_manifest});
      std::cout << "series for " << series.variant_name << ": " << series.rows.size()
                << " epochs, early_stop=" << early << '\n';
    } else if (*cmd_regress) {
      std::vector<slick::DynamicsSeries> series_set;
      for (const auto& path : reg_series) {
        std::ifstream in(path);
        if (!in) throw slick::Error(slick::errkind::IoError, "cannot open " + path);
        series_set.push_back(slick::series_from_json(json::parse(in)));
      }
      const auto points = slick::collect_regression_points(series_set);
      const auto fit = slick::fit_linear_model(points);
      fs::create_directories(reg_out_dir);
      {
        json out{{"beta0", fit.beta0},
                 {"beta_kn", fit.beta_kn},
                 {"beta_unk", fit.beta_unk},
                 {"r_squared", fit.r_squared},
                 {"n_points", fit.n_points}};
        std::ofstream f(fs::path(reg_out_dir) / "linear_fit.json");
        f << out.dump(2) << '\n';
      }
      slick::write_regression_scatter_csv(fs::path(reg_out_dir) / "regression_scatter.csv", points, fit);
      write_run_provenance(reg_out_dir, "regress", app, reg_series);
      std::cout << "beta0=" << fit.beta0 << " beta_kn=" << fit.beta_kn << " beta_unk=" << fit.beta_unk
                << " r_squared=" << fit.r_squared << " n=" << fit.n_points << '\n';
    } else if (*cmd_ttest) {
      const auto manifest = slick::load_corpus_manifest(tt_manifest);
      std::map<std::string, std::vector<std::string>> gold_by_id;
      for (const auto& p : manifest.pairs) gold_by_id[p.id] = p.gold_answers;
      const auto preds_a = read_predictions(tt_a, slick::Split::test);
      const auto preds_b = read_predictions(tt_b, slick::Split::test);
      const auto report = slick::paired_t_test(preds_a, preds_b, gold_by_id, tt_subsets, global_seed);
      fs::create_directories(tt_out_dir);
      {
        json out{{"t_statistic", report.t_statistic}, {"p_value", report.p_value},
                 {"df", report.df},                   {"n_subsets", report.n_subsets},
                 {"significant_05", report.significant_05}, {"significant_01", report.significant_01}};
        std::ofstream f(fs::path(tt_out_dir) / "ttest_report.json");
        f << out.dump(2) << '\n';
      }
      write_run_provenance(tt_out_dir, "ttest", app, {tt_manifest, tt_a, tt_b});
      std::cout << "t=" << report.t_statistic << " p=" << report.p_value << " df=" << report.df << '\n';
    } else if (*cmd_ptrue) {
      const auto manifest = slick::load_corpus_manifest(pt_manifest);
      auto gateway = make_gateway(pt_endpoint);
      std::unique_ptr<slick::CacheStore> cache;
      if (!pt_cache.empty()) cache = std::make_unique<slick::CacheStore>(pt_cache);
      const auto split = slick::split_from_string(pt_split);
      std::vector<slick::PTrueRecord> records;
      for (const auto& pair : manifest.split_pairs(split))
        records.push_back(slick::ptrue_score(pair, gateway, cache.get(), pt_probes, global_seed));
      fs::create_directories(pt_out_dir);
      {
        std::ofstream out(fs::path(pt_out_dir) / "ptrue_records.jsonl");
        for (const auto& r : records)
          out << json{{"example_id", r.example_id},
                      {"p_true", r.p_true},
                      {"n_probe_samples", r.n_probe_samples}}
                     .dump()
              << '\n';
      }
      if (!pt_post_ft.empty()) {
        std::map<std::string, std::vector<std::string>> gold_by_id;
        for (const auto& p : manifest.pairs) gold_by_id[p.id] = p.gold_answers;
        std::map<std::string, bool> correct;
        for (const auto& pred : read_predictions(pt_post_ft, split))
          correct[pred.example_id] = slick::exact_match(pred.predicted, gold_by_id.at(pred.example_id));
        const auto curve = slick::ptrue_threshold_sweep(records, correct);
        slick::write_ptrue_curve_csv(fs::path(pt_out_dir) / "ptrue_curve.csv", curve);
        json curve_json = json::array();
        for (const auto& p : curve)
          curve_json.push_back(json{{"threshold", p.threshold},
                                    {"fraction_unknown", p.fraction_unknown},
                                    {"accuracy_on_unknown", p.accuracy_on_unknown},
                                    {"n_unknown", p.n_unknown}});
        std::ofstream out(fs::path(pt_out_dir) / "ptrue_curve.json");
        out << curve_json.dump(2) << '\n';
      }
      write_run_provenance(pt_out_dir, "ptrue", app, {pt_manifest, pt_post_ft});
      std::cout << "scored " << records.size() << " pairs\n";
    } else if (*cmd_plot) {
      std::vector<slick::DynamicsSeries> series_set;
      std::map<std::string, double> pct_by_variant;
      for (const auto& path : plot_series) {
        std::ifstream in(path);
        if (!in) throw slick::Error(slick::errkind::IoError, "cannot open " + path);
        json j = json::parse(in);
        auto series = slick::series_from_json(j);
        const double pct =
            series.d_size > 0 ? 100.0 * series.unknown_size / series.d_size : 0.0;
        pct_by_variant[series.variant_name] = pct;
        series_set.push_back(std::move(series));
      }
      fs::create_directories(plot_out_dir);
      slick::write_accuracy_vs_unknown_csv(fs::path(plot_out_dir) / "accuracy_vs_unknown.csv",
                                           series_set, pct_by_variant, plot_durations);
      for (const auto& series : series_set)
        slick::write_series_csv(fs::path(plot_out_dir) / ("train_dynamics_" + series.variant_name + ".csv"),
                                series);
      slick::write_fitted_pies_csv(fs::path(plot_out_dir) / "fitted_pies.csv", series_set);
      if (!plot_fit.empty()) {
        std::ifstream in(plot_fit);
        if (!in) throw slick::Error(slick::errkind::IoError, "cannot open " + plot_fit);
        json j = json::parse(in);
        slick::LinearFit fit;
        fit.beta0 = j.at("beta0").get<double>();
        fit.beta_kn = j.at("beta_kn").get<double>();
        fit.beta_unk = j.at("beta_unk").get<double>();
        fit.r_squared = j.at("r_squared").get<double>();
        fit.n_points = j.at("n_points").get<int>();
        const auto points = slick::collect_regression_points(series_set);
        slick::write_regression_scatter_csv(fs::path(plot_out_dir) / "regression_scatter.csv", points,
                                            fit);
      }
      if (!plot_curve.empty()) {
        std::ifstream in(plot_curve);
        if (!in) throw slick::Error(slick::errkind::IoError, "cannot open " + plot_curve);
        json j = json::parse(in);
        std::vector<slick::SweepPoint> curve;
        for (const auto& p : j) {
          slick::SweepPoint point;
          point.threshold = p.at("threshold").get<double>();
          point.fraction_unknown = p.at("fraction_unknown").get<double>();
          point.accuracy_on_unknown = p.at("accuracy_on_unknown").get<double>();
          point.n_unknown = p.at("n_unknown").get<int>();
          curve.push_back(point);
        }
        slick::write_ptrue_curve_csv(fs::path(plot_out_dir) / "ptrue_curve.csv", curve);
      }
      write_run_provenance(plot_out_dir, "plot", app, plot_series);
      std::cout << "plot data written to " << plot_out_dir << '\n';
    }
  } catch (const slick::Error& e) {
    if (error_json) {
      std::cout << json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
    }
    std::cerr << "error[" << e.kind() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    if (error_json) {
      std::cout << json{{"error", "Unexpected"}, {"message", e.what()}}.dump() << '\n';
    }
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
