#pragma once

#include "core/config.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace fogctl {

enum class OutputFormat { kJson, kCsv };

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  OutputFormat format = OutputFormat::kJson;
};

/// Named output files (name -> contents) plus whether every check passed.
struct CommandOutput {
  std::map<std::string, std::string> files;
  bool passed = true;
  std::string message;
};

CommandOutput cmd_gains(const Experiment& e, const CommandOptions& options = {});
CommandOutput cmd_simulate(const Experiment& e, const CommandOptions& options = {});
CommandOutput cmd_verify(const Experiment& e, const CommandOptions& options = {});
CommandOutput cmd_placement(const Experiment& e, const CommandOptions& options = {});
CommandOutput cmd_waypoints(const Experiment& e, const CommandOptions& options = {});

/// Stage count of a latency: ceil(latency / delta_t), guarded against
/// round-off just above an integer.
int latency_stages(double latency_seconds, double delta_t);

}  // namespace fogctl
