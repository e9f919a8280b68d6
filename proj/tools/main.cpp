#include "ibprox/cli.hpp"

int main(int argc, char** argv) {
    return ibprox::cli_main(argc, argv);
}
