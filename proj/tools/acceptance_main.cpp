#include <cstdio>

#include <fmt/format.h>

#include "tack/acceptance.hpp"

int main() {
    const auto inputs = tack::acceptance::default_inputs();
    int failed = 0;
    tack::acceptance::run(inputs, [&](const tack::acceptance::CriterionResult& r) {
        fmt::print("{}\n", tack::acceptance::format_line(r));
        std::fflush(stdout);
        failed += !r.pass;
    });
    fmt::print("{} of 12 criteria passed\n", 12 - failed);
    return failed == 0 ? 0 : 1;
}
