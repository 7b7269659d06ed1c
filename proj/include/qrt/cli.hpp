#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "qrt/error.hpp"

namespace qrt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;      // usage or configuration error
inline constexpr int kExitData = 3;       // unreadable or inconsistent data
inline constexpr int kExitNumerical = 4;  // a numerical procedure did not converge

int exit_code(ErrorKind kind);

/// Runs one command line (without the program name). Results go to files in
/// the output directory and to `out`; diagnostics to `err`. Returns the
/// process exit code.
///
///   synth            calibrate noise if needed, write train/test/Rabi datasets
///   calibrate-noise  find sigma for the target raw fidelity
///   train            fit raw readout, FNN and TRMNN on a training dataset
///   eval             assignment fidelities on a test dataset
///   rabi             Rabi curves, sine fits, F_R and variances
///   sweep            population estimates across superposition states
///   report           summarize the report files of an output directory
///   run              all of the above in order
///   demod            CSV of demodulated IQ points of a dataset
///   raw-eval         raw readout calibrated on one dataset, scored on another
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qrt::cli
