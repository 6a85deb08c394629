// slick-simulate: synthetic trainer stand-in. Produces per-epoch prediction
// snapshots for a variant so the analysis stages can run without a real
// fine-tuning job.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "slick/corpus.hpp"
#include "slick/sim.hpp"

int main(int argc, char** argv) {
  CLI::App app{"simulate per-epoch prediction snapshots for a dataset variant"};
  std::string variant_path, manifest_path, out_dir;
  slick::SimConfig config;
  app.add_option("--variant", variant_path, "Variant JSON")->required();
  app.add_option("--manifest", manifest_path, "Corpus manifest JSON")->required();
  app.add_option("--out-dir", out_dir, "Snapshot output root")->required();
  app.add_option("--epochs", config.epochs)->capture_default_str();
  app.add_option("--fit-prob-known", config.fit_prob_known)->capture_default_str();
  app.add_option("--fit-prob-unknown", config.fit_prob_unknown)->capture_default_str();
  app.add_option("--beta0", config.beta0)->capture_default_str();
  app.add_option("--beta-kn", config.beta_kn)->capture_default_str();
  app.add_option("--beta-unk", config.beta_unk)->capture_default_str();
  app.add_option("--seed", config.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    const auto variant = slick::load_variant_file(variant_path);
    const auto manifest = slick::load_corpus_manifest(manifest_path);
    slick::simulate_snapshots(variant, manifest, config, out_dir);
    std::cout << "wrote " << config.epochs << " epochs for " << variant.name << " under " << out_dir
              << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
