#include "fogctl/fogctl.h"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerification = 3;

int exit_code_for(fogctl_status s) {
  return (s == FOGCTL_ERR_CONFIG || s == FOGCTL_ERR_MODEL) ? kExitConfig : kExitOther;
}

struct Invocation {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  std::string out = ".";
  std::string format = "json";
};

int execute(fogctl_command command, const Invocation& inv) {
  fogctl_config* config = nullptr;
  fogctl_status s = fogctl_config_load(inv.config.c_str(), &config);
  if (s != FOGCTL_OK) {
    std::cerr << "error: " << fogctl_last_error() << "\n";
    return exit_code_for(s);
  }
  for (size_t i = 0; i < fogctl_config_warning_count(config); ++i) {
    std::cerr << "warning: " << fogctl_config_warning(config, i) << "\n";
  }

  fogctl_run_options opts{};
  opts.has_seed = inv.seed.has_value();
  opts.seed = inv.seed.value_or(0);
  opts.has_replications = inv.replications.has_value();
  opts.replications = inv.replications.value_or(0);
  opts.format = inv.format == "csv" ? FOGCTL_FORMAT_CSV : FOGCTL_FORMAT_JSON;

  fogctl_result* result = nullptr;
  s = fogctl_run_command(command, config, &opts, &result);
  fogctl_config_free(config);
  if (s != FOGCTL_OK) {
    std::cerr << "error: " << fogctl_last_error() << "\n";
    return exit_code_for(s);
  }

  std::error_code ec;
  std::filesystem::create_directories(inv.out, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << inv.out << ": " << ec.message() << "\n";
    fogctl_result_free(result);
    return kExitOther;
  }
  for (size_t i = 0; i < fogctl_result_file_count(result); ++i) {
    const std::filesystem::path path = std::filesystem::path(inv.out) / fogctl_result_file_name(result, i);
    size_t len = 0;
    const char* data = fogctl_result_file_data(result, i, &len);
    std::ofstream f(path, std::ios::binary);
    f.write(data, static_cast<std::streamsize>(len));
    if (!f) {
      std::cerr << "error: cannot write " << path << "\n";
      fogctl_result_free(result);
      return kExitOther;
    }
    std::cout << path.string() << "\n";
  }
  const bool passed = fogctl_result_passed(result) != 0;
  fogctl_result_free(result);
  if (!passed) {
    std::cerr << "verification failed\n";
    return kExitVerification;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal control over unreliable, delayed fog endpoints"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fogctl_version()));

  Invocation inv;
  const std::map<std::string, fogctl_command> commands{
      {"gains", FOGCTL_CMD_GAINS},         {"simulate", FOGCTL_CMD_SIMULATE},   {"verify", FOGCTL_CMD_VERIFY},
      {"placement", FOGCTL_CMD_PLACEMENT}, {"waypoints", FOGCTL_CMD_WAYPOINTS},
  };
  const std::map<std::string, std::string> help{
      {"gains", "compute the gain schedule and its closed-form cost"},
      {"simulate", "closed-loop Monte Carlo of the configured controller"},
      {"verify", "check closed forms against the brute-force oracle and the sandwich bounds"},
      {"placement", "rank candidate endpoints by minimum cost"},
      {"waypoints", "export the tracking scenario's waypoints"},
  };
  std::optional<fogctl_command> chosen;
  for (const auto& [name, cmd] : commands) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", inv.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", inv.seed, "master seed (overrides the config)");
    sub->add_option("--out", inv.out, "output directory")->capture_default_str();
    sub->add_option("--format", inv.format, "output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    sub->add_option("--replications", inv.replications, "Monte Carlo replications")->check(CLI::PositiveNumber);
    sub->callback([&chosen, cmd] { chosen = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  return execute(*chosen, inv);
}
