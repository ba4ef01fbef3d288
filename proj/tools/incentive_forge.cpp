#include <incentive_forge/cli.hpp>

int main(int argc, char** argv) { return incentive_forge::cli::run(argc, argv); }
