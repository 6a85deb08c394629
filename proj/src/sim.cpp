#include "slick/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "slick/rng.hpp"

namespace slick {

using nlohmann::json;

namespace {

constexpr const char* kWrongAnswer = "no prediction yet";

void write_predictions(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::ofstream out(path);
  if (!out) throw Error(errkind::IoError, "cannot write " + path.string());
  for (const auto& line : lines) out << line.dump() << '\n';
}

// Marks round(accuracy * n) ids correct, choice deterministic per epoch.
std::vector<json> coupled_split_predictions(const std::vector<QAPair>& pairs, double accuracy,
                                            std::uint64_t seed, const std::string& tag) {
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_correct =
      static_cast<std::size_t>(std::llround(accuracy * static_cast<double>(pairs.size())));
  std::vector<bool> correct(pairs.size(), false);
  for (std::size_t i = 0; i < std::min(n_correct, order.size()); ++i) correct[order[i]] = true;

  std::vector<json> lines;
  lines.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    lines.push_back(json{{"example_id", pairs[i].id},
                         {"predicted", correct[i] ? pairs[i].gold_answers.front() : kWrongAnswer},
                         {"source_tag", tag}});
  return lines;
}

}  // namespace

void simulate_snapshots(const DatasetVariant& variant, const CorpusManifest& manifest,
                        const SimConfig& config, const std::filesystem::path& out_dir) {
  if (variant.examples.empty()) throw Error(errkind::EmptyVariant, "cannot simulate an empty variant");
  if (config.epochs < 1) throw Error(errkind::InvalidRequest, "epochs must be >= 1");

  const auto dev_pairs = manifest.split_pairs(Split::dev);
  const auto test_pairs = manifest.split_pairs(Split::test);
  const double d_size = static_cast<double>(variant.examples.size());

  std::vector<bool> fitted(variant.examples.size(), false);
  const std::uint64_t run_seed = Rng::mix(config.seed, Rng::hash_str(variant.name));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng fit_rng(Rng::mix(run_seed, static_cast<std::uint64_t>(epoch)));
    int n_kn = 0;
    int n_unk = 0;
    std::vector<json> train_lines;
    train_lines.reserve(variant.examples.size());
    for (std::size_t i = 0; i < variant.examples.size(); ++i) {
      const auto& ex = variant.examples[i];
      const double p = is_known(ex.category) ? config.fit_prob_known : config.fit_prob_unknown;
      if (!fitted[i] && fit_rng.next_double() < p) fitted[i] = true;
      if (fitted[i]) {
        if (is_known(ex.category))
          ++n_kn;
        else
          ++n_unk;
      }
      train_lines.push_back(json{{"example_id", ex.pair.id},
                                 {"predicted", fitted[i] ? ex.target_answer : kWrongAnswer},
                                 {"source_tag", "epoch=" + std::to_string(epoch)}});
    }

    const double accuracy = std::clamp(
        config.beta0 + config.beta_kn * n_kn / d_size + config.beta_unk * n_unk / d_size, 0.0, 1.0);
    const std::string tag = "epoch=" + std::to_string(epoch);
    const auto epoch_dir = out_dir / variant.name / ("epoch_" + std::to_string(epoch));
    std::filesystem::create_directories(epoch_dir);
    write_predictions(epoch_dir / "train.jsonl", train_lines);
    write_predictions(epoch_dir / "dev.jsonl",
                      coupled_split_predictions(
                          dev_pairs, accuracy,
                          Rng::mix(run_seed, Rng::mix(Rng::hash_str("dev"), epoch)), tag));
    if (!test_pairs.empty())
      write_predictions(epoch_dir / "test.jsonl",
                        coupled_split_predictions(
                            test_pairs, accuracy,
                            Rng::mix(run_seed, Rng::mix(Rng::hash_str("test"), epoch)), tag));
  }
}

}  // namespace slick
