#include "hina/cli.hpp"

int main(int argc, char** argv) { return hina::cli::run(argc, argv); }
