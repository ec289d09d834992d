#pragma once

#include <string>
#include <vector>

#include "tricir/corpus/manifest.hpp"

namespace tricir::corpus {

class SimulatorNotFound : public std::runtime_error {
 public:
  explicit SimulatorNotFound(const std::string& msg) : std::runtime_error(msg) {}
};

struct CompileResult {
  std::string id;
  bool ran = false;
  bool compiled = false;
  bool timed_out = false;
  int exit_code = -1;
};

struct ValidationSummary {
  bool simulator_available = false;
  int total = 0;
  int ran = 0;
  int compiled = 0;
  double compile_rate = 0.0;  // percent over records that ran
  std::vector<CompileResult> results;
};

// Environment variable consulted when no explicit simulator path is given.
inline constexpr const char* kSimulatorEnvVar = "TRICIR_SIMULATOR";

// Invokes the external SPICE simulator in batch mode per netlist and records
// compile pass/fail. With no usable simulator the whole operation is skipped
// (simulator_available = false) rather than failing. Per-record timeouts and
// failures are non-fatal.
ValidationSummary validate_corpus(const Manifest& m, const std::string& base_dir,
                                  const std::string& simulator_path,
                                  int timeout_sec = 10);

}  // namespace tricir::corpus
