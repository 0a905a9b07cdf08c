#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "ccp/metamodel.hpp"
#include "ccp/optimizer.hpp"
#include "ccp/simulate.hpp"

namespace ccp::cli {

// One exit code per error category.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,       // bad command line (CLI parser reports its own)
  kConfig = 3,      // missing file, JSON syntax, schema violations
  kValidation = 4,  // cross-field invariants or command preconditions
  kRuntime = 5,     // simulation or optimization failure
  kIo = 6,          // output cannot be written
};

// Schema or syntax problem; the message names the offending field or line.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cross-field invariant violation; the message names the invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fully resolved run description: simulation, target path, search space and
// the two optimizer layers, plus output/reproducibility knobs. parse_config
// fills every default so the manifest echo is complete.
struct RunConfig {
  SimConfig sim;
  SpecifiedPath path;                // may be empty (plain simulate/verify)
  std::optional<Rect> design_space;  // required by sample/optimize
  CcpConfig ccp;
  double r_min = 1.0;
  SurrogateConfig surrogate;
  int holes = 1;        // hole count per design row for sample/train
  std::string dataset;  // train input; empty = "<out>/dataset.csv"
  std::string inner = "pso";  // "pso" | "bpnn-pso"
  bool svg = true;
  std::uint64_t seed = 1;
  int jobs = 1;
};

// JSON -> RunConfig with field-path diagnostics ("config: growth.da: must be
// > 0") and named cross-field invariants. source_name labels syntax errors.
RunConfig parse_config(std::istream& is, const std::string& source_name);
RunConfig parse_config_file(const std::string& file);

// Command-line flag overrides, applied after the file is parsed.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> solver;  // "full" | "dur"
  std::optional<std::string> inner;   // "pso" | "bpnn-pso"
};
void apply_overrides(RunConfig& cfg, const Overrides& o);

// Wall-clock phase breakdown and evaluation counts of one command.
struct TimingReport {
  double sampling_ms = 0.0;      // true-solver dataset evaluation
  double modeling_ms = 0.0;      // network training
  double optimization_ms = 0.0;  // swarm (adaptive sweep for optimize)
  double simulate_ms = 0.0;      // plain propagation
  double full_solve_ms = 0.0;    // summed per-step solve times by mode
  double dur_solve_ms = 0.0;
  double total_ms = 0.0;
  long true_evals = 0;
  long surrogate_evals = 0;
};

// Runs one of {simulate, sample, train, optimize, verify}; writes the output
// bundle (CSVs, manifest.json, timing.json, optional SVG) into out_dir.
// Throws the error categories above; dispatch() maps them to exit codes.
void run_command(const std::string& cmd, const RunConfig& cfg,
                 const std::string& out_dir);
int dispatch(const std::string& cmd, const RunConfig& cfg,
             const std::string& out_dir);

// Emitters, exposed for direct testing.
void write_manifest(std::ostream& os, const std::string& cmd,
                    const RunConfig& cfg);
void write_timing(std::ostream& os, const TimingReport& t);
// The polyline's points are exactly the path vertices; holes and key points
// are drawn for context.
void write_svg(std::ostream& os, const RunConfig& cfg, const Polyline& crack,
               const std::vector<Circle>& design_holes);

}  // namespace ccp::cli
