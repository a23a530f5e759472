#include "fogctl/fogctl.h"

#include "core/commands.hpp"
#include "core/oracle.hpp"

#include <cstring>
#include <new>
#include <string>
#include <utility>
#include <vector>

struct fogctl_config {
  fogctl::Experiment experiment;
};

struct fogctl_result {
  std::vector<std::pair<std::string, std::string>> files;
  bool passed = true;
};

struct fogctl_model {
  fogctl::LinearSystemModel model;
};

struct fogctl_schedule {
  fogctl::GainSchedule schedule;
};

namespace {

thread_local std::string last_error;

fogctl_status status_of(fogctl::ErrorCode code) {
  switch (code) {
    case fogctl::ErrorCode::kInvalidArgument: return FOGCTL_ERR_INVALID_ARGUMENT;
    case fogctl::ErrorCode::kModel: return FOGCTL_ERR_MODEL;
    case fogctl::ErrorCode::kConfig: return FOGCTL_ERR_CONFIG;
    case fogctl::ErrorCode::kNumeric: return FOGCTL_ERR_NUMERIC;
    case fogctl::ErrorCode::kUnsupported: return FOGCTL_ERR_UNSUPPORTED;
    case fogctl::ErrorCode::kRegimeMismatch: return FOGCTL_ERR_REGIME;
  }
  return FOGCTL_ERR_INTERNAL;
}

template <typename F>
fogctl_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return FOGCTL_OK;
  } catch (const fogctl::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return FOGCTL_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw fogctl::Error(fogctl::ErrorCode::kInvalidArgument, what);
}

fogctl::Matrix row_major(const double* data, int rows, int cols) {
  fogctl::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = data[i * cols + j];
  }
  return m;
}

const std::vector<fogctl::Matrix>& pick(const fogctl::GainSchedule& s, fogctl_matrix_kind kind) {
  switch (kind) {
    case FOGCTL_MATRIX_K: return s.K;
    case FOGCTL_MATRIX_L: return s.L;
    case FOGCTL_MATRIX_LAMBDA: return s.Lambda;
    case FOGCTL_MATRIX_V: return s.V;
    case FOGCTL_MATRIX_P: return s.P;
  }
  throw fogctl::Error(fogctl::ErrorCode::kInvalidArgument, "unknown matrix kind");
}

std::optional<fogctl::DelayProfile> delay_of(int forward, int backward) {
  if (forward == 0 && backward == 0) return std::nullopt;
  return fogctl::DelayProfile{forward, backward};
}

}  // namespace

extern "C" {

const char* fogctl_version(void) { return "0.1.0"; }

const char* fogctl_last_error(void) { return last_error.c_str(); }

void fogctl_string_free(char* s) { delete[] s; }

fogctl_status fogctl_config_load(const char* path, fogctl_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new fogctl_config{fogctl::load_experiment(path)};
  });
}

fogctl_status fogctl_config_parse(const char* json_text, fogctl_config** out) {
  return guarded([&] {
    require(json_text && out, "null argument");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw fogctl::Error(fogctl::ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
    }
    *out = new fogctl_config{fogctl::parse_experiment(doc)};
  });
}

fogctl_status fogctl_config_to_json(const fogctl_config* config, char** out) {
  return guarded([&] {
    require(config && out, "null argument");
    const std::string text = fogctl::to_json(config->experiment).dump(2);
    char* buf = new char[text.size() + 1];
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out = buf;
  });
}

size_t fogctl_config_warning_count(const fogctl_config* config) {
  return config ? config->experiment.warnings.size() : 0;
}

const char* fogctl_config_warning(const fogctl_config* config, size_t index) {
  if (!config || index >= config->experiment.warnings.size()) return nullptr;
  return config->experiment.warnings[index].c_str();
}

void fogctl_config_free(fogctl_config* config) { delete config; }

fogctl_status fogctl_run_command(fogctl_command command, const fogctl_config* config,
                                 const fogctl_run_options* options, fogctl_result** out) {
  return guarded([&] {
    require(config && out, "null argument");
    fogctl::CommandOptions opts;
    if (options) {
      if (options->has_seed) opts.seed = options->seed;
      if (options->has_replications) {
        require(options->replications >= 1, "replications must be >= 1");
        opts.replications = options->replications;
      }
      opts.format = options->format == FOGCTL_FORMAT_CSV ? fogctl::OutputFormat::kCsv : fogctl::OutputFormat::kJson;
    }
    const fogctl::Experiment& e = config->experiment;
    fogctl::CommandOutput r;
    switch (command) {
      case FOGCTL_CMD_GAINS: r = fogctl::cmd_gains(e, opts); break;
      case FOGCTL_CMD_SIMULATE: r = fogctl::cmd_simulate(e, opts); break;
      case FOGCTL_CMD_VERIFY: r = fogctl::cmd_verify(e, opts); break;
      case FOGCTL_CMD_PLACEMENT: r = fogctl::cmd_placement(e, opts); break;
      case FOGCTL_CMD_WAYPOINTS: r = fogctl::cmd_waypoints(e, opts); break;
      default: throw fogctl::Error(fogctl::ErrorCode::kInvalidArgument, "unknown command");
    }
    auto* res = new fogctl_result;
    res->passed = r.passed;
    for (auto& [name, data] : r.files) res->files.emplace_back(name, std::move(data));
    *out = res;
  });
}

int fogctl_result_passed(const fogctl_result* result) { return result && result->passed ? 1 : 0; }

size_t fogctl_result_file_count(const fogctl_result* result) { return result ? result->files.size() : 0; }

const char* fogctl_result_file_name(const fogctl_result* result, size_t index) {
  if (!result || index >= result->files.size()) return nullptr;
  return result->files[index].first.c_str();
}

const char* fogctl_result_file_data(const fogctl_result* result, size_t index, size_t* length) {
  if (!result || index >= result->files.size()) return nullptr;
  if (length) *length = result->files[index].second.size();
  return result->files[index].second.data();
}

void fogctl_result_free(fogctl_result* result) { delete result; }

fogctl_status fogctl_model_create_constant(int horizon, int state_dim, int control_dim, const double* a,
                                           const double* b, const double* q, const double* r, const double* w,
                                           const double* q_terminal, fogctl_model** out) {
  return guarded([&] {
    require(a && b && q && r && w && q_terminal && out, "null argument");
    require(horizon > 0 && state_dim > 0 && control_dim > 0, "dimensions must be positive");
    const int n = state_dim, s = control_dim;
    fogctl::LinearSystemModel m = fogctl::LinearSystemModel::constant(
        horizon, row_major(a, n, n), row_major(b, n, s), row_major(q, n, n), row_major(r, s, s), row_major(w, n, n),
        row_major(q_terminal, n, n));
    *out = new fogctl_model{fogctl::validate_model(m)};
  });
}

void fogctl_model_free(fogctl_model* model) { delete model; }

fogctl_status fogctl_schedule_compute(const fogctl_model* model, double p, int forward, int backward,
                                      fogctl_schedule** out) {
  return guarded([&] {
    require(model && out, "null argument");
    *out = new fogctl_schedule{fogctl::backward_recursion(model->model, p, delay_of(forward, backward))};
  });
}

int fogctl_schedule_length(const fogctl_schedule* schedule, fogctl_matrix_kind kind) {
  if (!schedule) return -1;
  try {
    return static_cast<int>(pick(schedule->schedule, kind).size());
  } catch (...) {
    return -1;
  }
}

fogctl_status fogctl_schedule_matrix(const fogctl_schedule* schedule, fogctl_matrix_kind kind, int k, double* out,
                                     size_t capacity, int* rows, int* cols) {
  return guarded([&] {
    require(schedule && rows && cols, "null argument");
    const auto& seq = pick(schedule->schedule, kind);
    require(k >= 0 && static_cast<size_t>(k) < seq.size(), "stage out of range");
    const fogctl::Matrix& m = seq[static_cast<size_t>(k)];
    *rows = static_cast<int>(m.rows());
    *cols = static_cast<int>(m.cols());
    const auto needed = static_cast<size_t>(m.size());
    require(out && capacity >= needed, "output buffer too small");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
    }
  });
}

void fogctl_schedule_free(fogctl_schedule* schedule) { delete schedule; }

fogctl_status fogctl_min_cost(const fogctl_model* model, const fogctl_schedule* schedule, const double* x0,
                              double tau0_on, double* total) {
  return guarded([&] {
    require(model && schedule && x0 && total, "null argument");
    const fogctl::Vector x = Eigen::Map<const fogctl::Vector>(x0, model->model.state_dim);
    const auto& s = schedule->schedule;
    *total = fogctl::is_delayed(s.regime) ? fogctl::min_cost_full_delayed(s, model->model, x).total
                                          : fogctl::min_cost_full_perfect(s, model->model, x, tau0_on).total;
  });
}

fogctl_status fogctl_brute_force(const fogctl_model* model, double p, double q, double tau0_on, int forward,
                                 int backward, const double* x0, double* total) {
  return guarded([&] {
    require(model && x0 && total, "null argument");
    const fogctl::Vector x = Eigen::Map<const fogctl::Vector>(x0, model->model.state_dim);
    *total = fogctl::brute_force_min_cost(model->model, {p, q, tau0_on}, delay_of(forward, backward), x);
  });
}

}  // extern "C"
