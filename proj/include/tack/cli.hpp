#pragma once

#include <string>
#include <vector>

namespace tack::cli {

// Exit codes: 0 ok, 1 acceptance criteria failed, 2 configuration, 3 physics, 4 filesystem.
int run(const std::vector<std::string>& args);
int main(int argc, char** argv);

} // namespace tack::cli
