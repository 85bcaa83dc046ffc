#include "dr/cli.hpp"

int main(int argc, char** argv) {
    return dr::run_command(argc, argv);
}
