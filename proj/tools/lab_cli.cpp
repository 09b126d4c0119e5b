#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "anosov/lab.hpp"

namespace lab = anosov::lab;

int main(int argc, char** argv) {
  CLI::App app{"Experiment runner for the negatively curved model surface and its embedded tori"};
  app.require_subcommand(1);

  std::string run_path, validate_path, output_dir;
  std::optional<unsigned> threads;

  CLI::App* run = app.add_subcommand("run", "Run the experiment named in a config file");
  run->add_option("config", run_path, "JSON config file")->required();
  run->add_option("--output-dir", output_dir, "Override output_dir from the config");
  run->add_option("--threads", threads, "Worker threads (0 = all cores)");

  CLI::App* val = app.add_subcommand("validate", "Check a config file and list diagnostics");
  val->add_option("config", validate_path, "JSON config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*val) {
      const auto diags = lab::validate(lab::read_json_file(validate_path));
      for (const auto& d : diags) std::cout << d.str() << "\n";
      if (diags.empty()) std::cout << "ok\n";
      return diags.empty() ? 0 : 2;
    }
    lab::LabConfig cfg = lab::load_config(lab::read_json_file(run_path));
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (threads) cfg.threads = *threads;
    const lab::RunResult res = lab::run(cfg);
    if (res.exit_code != 0) {
      std::cerr << "error: " << res.message << "\n";
      return res.exit_code;
    }
    std::cout << lab::to_string(cfg.experiment) << ": " << res.summary.dump() << "\n";
    for (const auto& f : res.files) std::cout << "  " << (res.output_dir / f.name).string() << "  " << f.sha256 << "\n";
    std::cout << "  " << (res.output_dir / "manifest.json").string() << "\n";
    return 0;
  } catch (const anosov::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lab::exit_code_for(e.error_class());
  }
}
