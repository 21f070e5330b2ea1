// csproxy command line: stage-by-stage or end-to-end experiment runs.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "csproxy/errors.hpp"
#include "csproxy/experiment.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<double> rates;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string features;  // "train.feat,test.feat"
  std::string matrix;
};

csproxy::ExperimentConfig make_config(const GlobalArgs& args) {
  csproxy::ExperimentConfig cfg;
  if (!args.config_path.empty())
    cfg = csproxy::load_config(args.config_path);
  for (const auto& assignment : args.overrides)
    csproxy::apply_override(cfg, assignment);
  if (!args.rates.empty()) cfg.rates = args.rates;
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (!args.matrix.empty()) cfg.matrix_path = args.matrix;
  if (!args.features.empty()) {
    const auto comma = args.features.find(',');
    if (comma == std::string::npos)
      throw csproxy::ArgumentError(
          "--features expects <train.feat>,<test.feat>");
    cfg.external_train_features = args.features.substr(0, comma);
    cfg.external_test_features = args.features.substr(comma + 1);
  }
  return cfg;
}

void print_reports(const std::vector<csproxy::EvalReport>& reports) {
  std::cout << csproxy::report_table(reports);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compressive-sensing proxy classification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs args;
  app.add_option("--config", args.config_path, "experiment config (JSON)");
  app.add_option("--override", args.overrides,
                 "config override key=value (repeatable, dotted keys)");
  app.add_option("--rates", args.rates, "measurement rates, e.g. 0.25 0.1")
      ->delimiter(',');
  app.add_option("--seed", args.seed, "master seed");
  app.add_option("--out", args.out_dir, "output directory");
  app.add_option("--features", args.features,
                 "external feature files <train.feat>,<test.feat>");
  app.add_option("--matrix", args.matrix, "load the sensing matrix (PSIMAT)");

  auto* cmd_run = app.add_subcommand("run", "end-to-end sweep, writes reports");
  auto* cmd_sense =
      app.add_subcommand("sense", "build/load sensing matrices per rate");
  auto* cmd_calibrate = app.add_subcommand(
      "calibrate", "average zig-zag AC prefix lengths per block size");
  double cal_energy = 0.90;
  std::size_t cal_sample = 100;
  bool cal_originals = false;
  std::optional<double> cal_rate;
  cmd_calibrate->add_option("--energy", cal_energy, "energy fraction (0,1]");
  cmd_calibrate->add_option("--sample", cal_sample, "images to sample");
  cmd_calibrate->add_flag("--originals", cal_originals,
                          "calibrate on original images instead of proxies");
  cmd_calibrate->add_option("--rate", cal_rate,
                            "proxy measurement rate (default: first config "
                            "rate)");
  auto* cmd_describe =
      app.add_subcommand("describe", "compute + cache dense descriptors");
  auto* cmd_codebook =
      app.add_subcommand("codebook", "train + cache the visual dictionary");
  auto* cmd_encode =
      app.add_subcommand("encode", "encode + cache BoW features");
  auto* cmd_classify =
      app.add_subcommand("classify", "cross-validate, evaluate, write reports");
  auto* cmd_report = app.add_subcommand("report", "render a records file");
  std::string records_path;
  cmd_report->add_option("--records", records_path,
                         "records.tsv path (default <out>/records.tsv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_report->parsed()) {
      csproxy::ExperimentConfig cfg;  // only out_dir matters here
      if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
      if (records_path.empty()) records_path = cfg.out_dir + "/records.tsv";
      std::ifstream in(records_path, std::ios::binary);
      if (!in) throw csproxy::IoError("cannot open " + records_path);
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      print_reports(csproxy::parse_records(text));
      return 0;
    }

    csproxy::Experiment experiment(make_config(args));

    if (cmd_run->parsed() || cmd_classify->parsed()) {
      print_reports(experiment.run());
      return 0;
    }
    if (cmd_sense->parsed()) {
      for (double rate : experiment.effective_rates()) {
        const auto psi = experiment.measurement_matrix(rate);
        const auto& e = psi.entries();
        std::cout << "rate " << rate << ": " << psi.measurements() << "x"
                  << psi.signal_dim() << " " << psi.provenance().describe()
                  << " mean " << e.mean() << " var "
                  << (e.array() - e.mean()).square().mean() << "\n";
      }
      return 0;
    }
    if (cmd_calibrate->parsed()) {
      std::optional<double> rate;
      if (!cal_originals) {
        rate = cal_rate ? *cal_rate
                        : experiment.effective_rates().front();
      }
      const auto counts = experiment.calibrate(rate, cal_energy, cal_sample);
      std::cout << "input: "
                << (rate ? "proxies at rate " + std::to_string(*rate)
                         : std::string("original images"))
                << "\nenergy " << cal_energy << " counts:";
      for (int c : counts) std::cout << " " << c;
      std::cout << "\n";
      return 0;
    }
    if (cmd_describe->parsed()) {
      for (double rate : experiment.effective_rates()) {
        const auto psi = experiment.measurement_matrix(rate);
        for (auto part : {csproxy::Experiment::Part::Train,
                          csproxy::Experiment::Part::Test}) {
          const auto set = experiment.descriptors(psi, part);
          std::cout << "rate " << rate << " "
                    << (part == csproxy::Experiment::Part::Train ? "train"
                                                                 : "test")
                    << ": " << set.n_images << " images x " << set.per_image
                    << " descriptors x " << set.bits.bits() << " bits\n";
        }
      }
      return 0;
    }
    if (cmd_codebook->parsed()) {
      for (double rate : experiment.effective_rates()) {
        const auto psi = experiment.measurement_matrix(rate);
        const auto book = experiment.train_codebook(psi);
        std::cout << "rate " << rate << ": k=" << book.k() << " bits="
                  << book.bit_length() << " iterations=" << book.iterations
                  << "\n";
      }
      return 0;
    }
    if (cmd_encode->parsed()) {
      for (double rate : experiment.effective_rates()) {
        const auto psi = experiment.measurement_matrix(rate);
        const auto train = experiment.bow_features(
            psi, csproxy::Experiment::Part::Train);
        const auto test =
            experiment.bow_features(psi, csproxy::Experiment::Part::Test);
        std::cout << "rate " << rate << ": " << train.size() << " train + "
                  << test.size() << " test histograms, dim "
                  << (train.empty() ? 0 : train.front().values.size()) << "\n";
      }
      return 0;
    }
  } catch (const csproxy::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
