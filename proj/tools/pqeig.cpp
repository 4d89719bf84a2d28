#include "pqeig/cli_app.hpp"

int main(int argc, char** argv) { return pqeig::cli::run(argc, argv); }
