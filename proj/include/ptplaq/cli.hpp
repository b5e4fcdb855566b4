#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptplaq/dynamics.hpp"
#include "ptplaq/model.hpp"

namespace ptplaq::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Config rejected before any work is done; maps to exit status 2.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct GammaRange {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.01;
};

struct IntegrationSpec {
  double t_end = 50.0;
  double dt = kDefaultDt;
  std::size_t stride = kDefaultStride;
};

struct ExperimentConfig {
  std::string command;
  PlaquetteConfig plaquette;
  std::optional<double> e_or_g;
  std::optional<GammaRange> gamma_range;
  std::optional<std::string> branch;
  std::optional<PerturbationSpec> perturbation;
  IntegrationSpec integration;
  std::optional<std::string> figure;
  std::filesystem::path output_dir = ".";
  std::optional<std::uint64_t> seed;
  nlohmann::json echo;  // inputs as given, for the manifest
};

inline const std::vector<std::string> kCommands = {"spectrum",  "symmetry-report", "branches",        "continue",
                                                   "stability", "evolve",          "reproduce-figure"};

/// Validates `text` for `command`.  Throws SchemaError with the 1-based
/// line of the offending entry.
ExperimentConfig parse_config(const std::string& text, const std::string& command);

/// Config equivalent to a figure preset ("fig2" .. "fig12").
ExperimentConfig figure_preset(const std::string& figure);

/// Runs a validated config and writes its artifacts; library errors
/// propagate.  Returns the list of files written (manifest last).
std::vector<std::filesystem::path> run(const ExperimentConfig& config, std::ostream& log);

/// Full command-line entry point; returns the process exit status.
int main_entry(int argc, char** argv);

}  // namespace ptplaq::cli
