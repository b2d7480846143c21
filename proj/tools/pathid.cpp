#include "pathid/cli.hpp"

int main(int argc, char** argv) {
    return pathid::cli::run(argc, argv);
}
