#pragma once

#include <cstdint>
#include <filesystem>

#include "slick/corpus.hpp"

namespace slick {

// Synthetic fine-tuning run: each train example flips to "fitted" with a
// per-epoch probability that depends on whether its fact is Known, and dev /
// test accuracy is coupled linearly to the fitted fractions. Stands in for an
// external trainer so the analysis stages can be exercised offline.
struct SimConfig {
  int epochs = 12;
  double fit_prob_known = 0.45;
  double fit_prob_unknown = 0.06;
  // accuracy = beta0 + beta_kn * N_kn/|D| + beta_unk * N_unk/|D|, clamped to [0,1]
  double beta0 = 0.30;
  double beta_kn = 0.35;
  double beta_unk = -0.30;
  std::uint64_t seed = 0;
};

// Writes {out_dir}/{variant.name}/epoch_{N}/{train,dev,test}.jsonl snapshots.
void simulate_snapshots(const DatasetVariant& variant, const CorpusManifest& manifest,
                        const SimConfig& config, const std::filesystem::path& out_dir);

}  // namespace slick
