#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fcppn/gradcheck.hpp"

namespace fcppn {

struct GradSuiteEntry {
  std::string name;
  GradCheckReport report;  // worst over all inputs and trials
};

// Gradient checks for every OpKind on small random inputs (each trial draws
// fresh inputs), plus two end-to-end 16x16 pipelines: CPPN -> content loss
// and F-CPPN -> style loss, both through the pyramid extractor.
std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed = 0,
                                           std::size_t trials = 3,
                                           const GradCheckOptions& options = {});

}  // namespace fcppn
