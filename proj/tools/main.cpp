#include <string>
#include <vector>

#include "policyprobe/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return policyprobe::cli::run(args);
}
