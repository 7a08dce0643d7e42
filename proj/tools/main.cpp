#include "lcmito/cli_app.hpp"

int main(int argc, char** argv) { return lcmito::cli::run_cli(argc, argv); }
