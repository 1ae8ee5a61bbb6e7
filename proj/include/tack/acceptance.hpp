#pragma once

// The twelve acceptance checks, each a measured value against a target.

#include <functional>
#include <string>
#include <vector>

#include "tack/config.hpp"

namespace tack::acceptance {

struct CriterionResult {
    int id = 0;
    std::string name;
    std::string measured;
    std::string target;
    bool pass = false;
    double seconds = 0.0;
};

struct SuiteInputs {
    config::RunConfig base;
    config::RunConfig segmented;  // RF on the upper two segments
};

SuiteInputs default_inputs();

// Runs every criterion; a criterion that throws is reported as failed and the
// suite continues. `on_result` fires as each one finishes.
std::vector<CriterionResult> run(const SuiteInputs& inputs,
                                 const std::function<void(const CriterionResult&)>& on_result = {});

std::string format_line(const CriterionResult& r);

} // namespace tack::acceptance
