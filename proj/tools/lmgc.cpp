#include <lmgc/cli.hpp>

int main(int argc, char** argv) { return lmgc::cli::run(argc, argv); }
