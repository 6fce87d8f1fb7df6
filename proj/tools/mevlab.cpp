#include "mevlab_cli.hpp"

int main(int argc, char** argv) { return mevlab::cli::run(argc, argv); }
