#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "metaul/data_model.hpp"

namespace metaul::cli {

enum ExitCode : int { kOk = 0, kInvalidConfig = 1, kDataError = 2 };

// Everything a command needs, resolved from flags and defaults. Written as
// config.json next to the outputs it produced.
struct ExperimentConfig {
  std::string command;     // synth | run | report
  std::string experiment;  // run only
  std::string repo;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<double> train_fractions{0.5};
  std::size_t repeats = 10;
  unsigned threads = 1;
  std::vector<double> p_grid;
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::size_t runs_per_k = 10;
  bool raw_norm = false;
  std::size_t pair_cap = 2500;
  std::size_t epochs = 10;
  std::size_t batch = 250;
  SynthSpec synth;
  std::vector<std::string> inputs;  // report only

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  nlohmann::json to_json() const;
};

// Runs one command line (without the program name). Never throws; failures
// are reported on `err` and mapped to an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace metaul::cli
