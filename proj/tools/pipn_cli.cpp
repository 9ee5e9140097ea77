#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pipn/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string filter;
  int threads = 0;
  std::string data;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "root seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--filter", f.filter, "domain filter, e.g. shape=hexagon,side=2.0,omega=1..31");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
}

pipn::ExperimentConfig resolve(const CommonFlags& f, CLI::App* cmd) {
  pipn::ExperimentConfig c = f.config.empty() ? pipn::ExperimentConfig{} : pipn::load_config(f.config);
  if (cmd->count("--seed")) c.seed = f.seed;
  if (cmd->count("--out")) c.out_dir = f.out;
  if (cmd->count("--filter")) c.filter = f.filter;
  if (cmd->count("--threads")) c.threads = f.threads;
  if (auto* o = cmd->get_option_no_throw("--data"); o && o->count()) c.data_dir = f.data;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud network for inverse plane-stress thermoelasticity"};
  app.require_subcommand(1);

  CommonFlags gen_f, train_f, sweep_f;
  auto* gen = app.add_subcommand("gen-data", "sample geometries, solve reference fields, write dataset files");
  add_common(gen, gen_f);

  auto* trn = app.add_subcommand("train", "train on a dataset and evaluate");
  add_common(trn, train_f);
  trn->add_option("--data", train_f.data, "dataset directory (overrides data_dir)");
  std::string resume;
  trn->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  auto* swp = app.add_subcommand("sweep", "one training per value of an axis");
  add_common(swp, sweep_f);
  swp->add_option("--data", sweep_f.data, "dataset directory (overrides data_dir)");
  std::string axis;
  std::vector<std::string> values;
  swp->add_option("--axis", axis, "batch_size, network_size, pooling or schedule")->required();
  swp->add_option("--values", values, "values of the axis")->required()->delimiter(',');

  auto* rep = app.add_subcommand("report", "summarize a finished run and write plot CSVs");
  std::string run_dir;
  rep->add_option("run", run_dir, "run directory")->required();

  auto* cfg = app.add_subcommand("config", "print the default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto c = resolve(gen_f, gen);
      const auto r = pipn::cmd_gen_data(c, std::cout);
      std::cout << r.written.size() << " written, " << r.failed.size() << " failed\n";
      return r.failed.empty() ? 0 : 3;
    }
    if (*trn) {
      pipn::cmd_train(resolve(train_f, trn), resume, std::cout);
      return 0;
    }
    if (*swp) {
      pipn::cmd_sweep(resolve(sweep_f, swp), pipn::parse_sweep_axis(axis), values, std::cout);
      return 0;
    }
    if (*rep) {
      pipn::cmd_report(run_dir, std::cout);
      return 0;
    }
    if (*cfg) {
      std::cout << pipn::to_json(pipn::ExperimentConfig{}).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
