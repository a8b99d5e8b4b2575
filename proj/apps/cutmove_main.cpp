#include <string>
#include <vector>

#include "cutmove/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cutmove::cli_main(args);
}
