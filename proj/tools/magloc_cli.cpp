#include <magloc/cli.hpp>

int main(int argc, char** argv) { return magloc::cli_main(argc, argv); }
