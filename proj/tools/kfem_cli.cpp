#include "kfem/cli.hpp"

int main(int argc, char** argv) { return kfem::cli::run(argc, argv); }
