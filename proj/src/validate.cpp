#include "tricir/corpus/validate.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

namespace tricir::corpus {

namespace {

namespace fs = std::filesystem;

bool is_executable(const std::string& path) {
  if (path.empty()) return false;
  std::error_code ec;
  fs::file_status st = fs::status(path, ec);
  if (ec || !fs::is_regular_file(st)) {
    // allow bare command names resolved through PATH
    if (path.find('/') != std::string::npos) return false;
    const char* penv = std::getenv("PATH");
    if (!penv) return false;
    std::string pathvar = penv;
    std::size_t start = 0;
    while (start <= pathvar.size()) {
      std::size_t end = pathvar.find(':', start);
      std::string dir = pathvar.substr(
          start, end == std::string::npos ? std::string::npos : end - start);
      if (!dir.empty() && fs::is_regular_file(fs::path(dir) / path, ec)) return true;
      if (end == std::string::npos) break;
      start = end + 1;
    }
    return false;
  }
  return true;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  out += "'";
  return out;
}

}  // namespace

ValidationSummary validate_corpus(const Manifest& m, const std::string& base_dir,
                                  const std::string& simulator_path, int timeout_sec) {
  ValidationSummary sum;
  sum.total = static_cast<int>(m.records.size());

  std::string sim = simulator_path;
  if (sim.empty()) {
    const char* env = std::getenv(kSimulatorEnvVar);
    if (env) sim = env;
  }
  if (!is_executable(sim)) {
    sum.simulator_available = false;
    return sum;  // skipped; callers print the warning
  }
  sum.simulator_available = true;

  for (const TripletRecord& rec : m.records) {
    CompileResult res;
    res.id = rec.id;
    fs::path netlist = fs::path(base_dir) / rec.netlist_path;
    std::string cmd = "timeout " + std::to_string(timeout_sec) + " " + shell_quote(sim) +
                      " -b " + shell_quote(netlist.string()) + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    res.ran = true;
    if (WIFEXITED(rc)) {
      res.exit_code = WEXITSTATUS(rc);
      res.timed_out = res.exit_code == 124;
      res.compiled = res.exit_code == 0;
    }
    sum.ran += 1;
    sum.compiled += res.compiled ? 1 : 0;
    sum.results.push_back(res);
  }
  sum.compile_rate = sum.ran ? 100.0 * sum.compiled / sum.ran : 0.0;
  return sum;
}

}  // namespace tricir::corpus
