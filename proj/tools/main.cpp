#include "commands.hpp"

int main(int argc, char** argv) {
    return thermalsr::cli::run(argc, argv);
}
