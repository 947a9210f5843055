#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "good/evalbench.hpp"
#include "good/synth.hpp"
#include "good/trainer.hpp"

namespace good {

/// Everything a command can be configured with. The text form is flat
/// `key = value` lines; `#` starts a comment; lists are comma separated.
/// `seed` drives both generation and training.
struct RunConfig {
    SynthConfig synth;
    TrainConfig train;
    std::vector<Member> suite = default_suite();
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    // Companion mixture file for GOOD_LC_PLUS runs (written by GOOD_LC training).
    std::string coefficients;

    // Both halves plus the suite; raises ConfigError naming the key.
    void validate() const;
    // Training keys plus the suite, for commands that read an existing dataset.
    void validate_experiment() const;
};

// Unknown or repeated keys and malformed values raise ConfigError with the
// line number; keys not mentioned keep their defaults.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "config");
RunConfig load_run_config(const std::filesystem::path& path);

// Every key with its resolved value; parse_run_config(format_run_config(c))
// reproduces c.
std::string format_run_config(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

} // namespace good
