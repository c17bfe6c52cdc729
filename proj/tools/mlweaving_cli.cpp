#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "mlweaving/app.hpp"

namespace {

using mlweaving::RunConfig;

void add_input_options(CLI::App* cmd, RunConfig& cfg, std::string& format) {
  cmd->add_option("--dataset", cfg.dataset, "Input dataset path");
  cmd->add_option("--format", format, "Dataset format: libsvm | csv")->check(CLI::IsMember({"libsvm", "csv"}));
  cmd->add_option("--features", cfg.declared_features, "Declared feature count (libsvm)");
  cmd->add_option("--max-bits", cfg.max_bits, "Maximum stored precision S (1..32)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Any-precision GLM training over bit-plane weaving stores"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string format = "libsvm";
  std::string loss = "linreg";
  bool no_chaining = false;

  auto* quantize = app.add_subcommand("quantize", "Normalize and quantize a dataset to S-bit codes");
  add_input_options(quantize, cfg, format);
  quantize->add_option("--loss", loss, "linreg | logreg (logreg maps labels to {0,1})");
  quantize->add_option("-o,--out", cfg.out, "Output code table")->required();

  auto* weave = app.add_subcommand("weave", "Build an MLWeaving store (.mlwv) from a dataset");
  add_input_options(weave, cfg, format);
  weave->add_option("--loss", loss, "linreg | logreg (logreg maps labels to {0,1})");
  weave->add_option("-o,--out", cfg.out, "Output .mlwv path")->required();

  auto* train = app.add_subcommand("train", "Run low-precision mini-batch SGD");
  add_input_options(train, cfg, format);
  train->add_option("--store", cfg.store, "Input .mlwv store (instead of --dataset)");
  train->add_option("--loss", loss, "linreg | logreg")->check(CLI::IsMember({"linreg", "logreg"}));
  train->add_option("--precision", cfg.precision, "Bits per feature, or 'schedule' for the dynamic schedule");
  train->add_option("--batch", cfg.batch, "Mini-batch size B (multiple of 8, power of two)");
  train->add_option("--lr-shift", cfg.lr_shift, "Learning rate 2^-j");
  train->add_option("--decay-epoch", cfg.decay_epoch, "Halve the learning rate after this epoch");
  train->add_option("--epochs", cfg.epochs, "Number of epochs");
  train->add_option("--seed", cfg.seed, "Shuffle samples each epoch with this seed");
  train->add_flag("--no-chaining", no_chaining, "Predict epoch time without chaining");
  train->add_flag("--fixed-clock", cfg.fixed_clock, "Write wall_ms as 0 so metrics are byte-reproducible");
  train->add_option("--metrics", cfg.metrics_out, "Metrics CSV output");
  train->add_option("--model", cfg.model_out, "Model CSV output");
  train->add_option("--save-store", cfg.store_out, "Also write the built .mlwv store");
  train->add_option("--profile", cfg.profile, "Memory throughput profile (default: $MLWEAVING_PROFILE)");

  auto* bench = app.add_subcommand("bench", "Speedup surface and simulator-vs-model agreement table");
  bench->add_option("--batch", cfg.batch, "Mini-batch size B");
  bench->add_option("--features", cfg.feature_grid, "Feature counts M")->expected(0, -1);
  bench->add_option("--precision", cfg.precision_grid, "Precision levels s")->expected(0, -1);
  bench->add_option("--batches", cfg.batches_per_point, "Simulated batches per grid point");
  bench->add_option("--profile", cfg.profile, "Memory throughput profile");
  bench->add_option("-o,--out", cfg.out, "CSV output (default stdout)");

  auto* predict = app.add_subcommand("predict", "Cost-model throughput and epoch time");
  predict->add_option("--batch", cfg.batch, "Mini-batch size B");
  predict->add_option("--features", cfg.features, "Feature count M");
  predict->add_option("--bits", cfg.bits, "Precision s");
  predict->add_option("--samples", cfg.samples, "Sample count N");
  predict->add_option("--profile", cfg.profile, "Memory throughput profile");

  auto* synth = app.add_subcommand("synth", "Write a planted-model synthetic dataset");
  synth->add_option("--samples", cfg.synthetic.samples, "Sample count");
  synth->add_option("--features", cfg.synthetic.features, "Feature count");
  synth->add_option("--seed", cfg.synthetic.seed, "Generator seed");
  synth->add_option("--noise", cfg.synthetic.noise, "Label noise standard deviation");
  synth->add_flag("--logistic", cfg.synthetic.logistic, "Binary labels instead of regression targets");
  synth->add_option("--format", format, "libsvm | csv")->check(CLI::IsMember({"libsvm", "csv"}));
  synth->add_option("-o,--out", cfg.out, "Output dataset path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    cfg.format = mlweaving::parse_dataset_format(format);
    cfg.loss = mlweaving::parse_loss_kind(loss);
    cfg.chaining = !no_chaining;

    if (quantize->parsed()) {
      cfg.command = "quantize";
      mlweaving::run_quantize(cfg, std::cerr);
    } else if (weave->parsed()) {
      cfg.command = "weave";
      mlweaving::run_weave(cfg, std::cerr);
    } else if (train->parsed()) {
      cfg.command = "train";
      mlweaving::run_train(cfg, std::cout);
    } else if (bench->parsed()) {
      cfg.command = "bench";
      if (cfg.out.empty()) {
        mlweaving::run_bench(cfg, std::cout, std::cerr);
      } else {
        std::ofstream out(cfg.out, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + cfg.out + " for writing");
        mlweaving::run_bench(cfg, out, std::cerr);
      }
    } else if (predict->parsed()) {
      cfg.command = "predict";
      mlweaving::run_predict(cfg, std::cout);
    } else if (synth->parsed()) {
      cfg.command = "synth";
      mlweaving::run_synth(cfg, std::cerr);
    }
  } catch (const mlweaving::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
