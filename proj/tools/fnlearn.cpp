#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "fnlearn/pipeline/commands.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

struct Overrides {
  std::string config_file;
  std::string preset;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;
};

fnlearn::pipeline::RunConfig resolve(const Overrides& o) {
  fnlearn::pipeline::RunConfig cfg;
  if (!o.preset.empty()) cfg.set("preset", o.preset);
  if (!o.config_file.empty()) cfg.load_file(o.config_file);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw fnlearn::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(std::string(fnlearn::gp::detail::trim(kv.substr(0, eq))),
            std::string(fnlearn::gp::detail::trim(kv.substr(eq + 1))));
  }
  for (const auto& [k, v] : o.flags) cfg.set(k, v);
  return cfg;
}

/// Adds `--<flag>` that overrides config key `key` when given.
void flag(CLI::App* app, Overrides& o, const std::string& name, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      name, [&o, key](const std::string& v) { o.flags.emplace_back(key, v); }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Function-learning pipeline: generate curves, train encoders, evaluate heads, render reports."};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("-c,--config", o.config_file, "key = value config file");
  app.add_option("--preset", o.preset, "paper or desk");
  app.add_option("--set", o.sets, "override one config key (key=value); repeatable");
  flag(&app, o, "--master-seed", "master_seed", "master seed for every random stream");

  auto* gen = app.add_subcommand("gen", "write redraw manifests and curve datasets");
  flag(gen, o, "--redraws", "redraws", "number of hyperparameter redraws");
  flag(gen, o, "--per-class", "per_class", "curves per kernel family per redraw");
  flag(gen, o, "--data-dir", "data_dir", "output directory");

  auto* train = app.add_subcommand("train", "train encoder copies");
  flag(train, o, "--seeds", "seeds", "number of encoder copies");
  flag(train, o, "--curves", "curves", "training curves per copy");
  flag(train, o, "--checkpoint-dir", "checkpoint_dir", "output directory");

  std::string task;
  auto* ev = app.add_subcommand("eval", "run the evaluation protocol for one task");
  ev->add_option("task", task, "classify, mc or freeform")->required();
  flag(ev, o, "--seeds", "seeds", "encoder copies to evaluate");
  flag(ev, o, "--redraws", "redraws", "redraws to evaluate");
  flag(ev, o, "--models", "models", "comma-separated: contrastive, raw, random");
  flag(ev, o, "--eval-dir", "eval_dir", "output directory");

  auto* report = app.add_subcommand("report", "render plots and tables from eval outputs");
  flag(report, o, "--report-dir", "report_dir", "output directory");

  auto* aug = app.add_subcommand("augment", "augmentation tools");
  aug->require_subcommand(1);
  auto* preview = aug->add_subcommand("preview", "write augmented copies of sample curves (CSV + SVG)");
  flag(preview, o, "--curves", "preview_curves", "source curves");
  flag(preview, o, "--report-dir", "report_dir", "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::cout << std::unitbuf;
  try {
    const auto cfg = resolve(o);
    if (gen->parsed()) fnlearn::pipeline::cmd_gen(cfg, std::cout);
    if (train->parsed()) fnlearn::pipeline::cmd_train(cfg, std::cout);
    if (ev->parsed()) fnlearn::pipeline::cmd_eval(cfg, fnlearn::eval::parse_task(task), std::cout);
    if (report->parsed()) fnlearn::pipeline::cmd_report(cfg, std::cout);
    if (preview->parsed()) fnlearn::pipeline::cmd_preview(cfg, std::cout);
  } catch (const fnlearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fnlearn::MissingArtifact& e) {
    std::cerr << e.what() << '\n';
    return kExitMissing;
  } catch (const fnlearn::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
