#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ralab/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ralab: restricted approximability experiments"};
  app.require_subcommand(1);
  std::string config_path, out_dir, scale = "desk";
  std::optional<std::uint64_t> seed;
  bool print_config = false;

  for (const char* kind : {"circle", "swissroll", "invertible", "perturbation"}) {
    CLI::App* sub = app.add_subcommand(kind, std::string("run the ") + kind + " experiment");
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--print-config", print_config, "print the resolved config as JSON and exit");
    sub->add_option("--seed", seed, "override the seed list with a single seed");
    sub->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  }
  CLI11_PARSE(app, argc, argv);
  const std::string kind = app.get_subcommands().front()->get_name();

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      j = nlohmann::json::parse(f);
      if (j.contains("kind") && j.at("kind") != kind)
        throw ralab::InvalidArgument("config kind '" + j.at("kind").get<std::string>() + "' does not match '" + kind + "'");
    }
    if (seed) j["seeds"] = {*seed};
    const bool scale_given = app.get_subcommands().front()->count("--scale") > 0;
    const ralab::ExperimentConfig config =
        ralab::ExperimentConfig::from_json(j, kind, scale_given ? scale : j.value("scale", scale));
    if (print_config) {
      std::cout << config.to_json().dump(2) << '\n';
      return 0;
    }
    if (out_dir.empty()) throw ralab::InvalidArgument("--out is required");
    const nlohmann::json summary = ralab::run_experiment(config, out_dir);

    std::cout << "metric,value\n";
    for (const auto& [key, value] : summary.items())
      if (value.is_number()) std::cout << key << ',' << value.dump() << '\n';
    return 0;
  } catch (const ralab::ConstraintViolation& e) {
    std::cerr << "constraint violation: " << e.what() << '\n';
    return 2;
  } catch (const ralab::NonFiniteError& e) {
    std::cerr << "non-finite value: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
