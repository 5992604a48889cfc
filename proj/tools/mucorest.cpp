#include "mucorest/cli.hpp"

int main(int argc, char** argv) { return mucorest::cli::main(argc, argv); }
