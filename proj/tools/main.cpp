#include "cli_app.hpp"

int main(int argc, char** argv) { return gamsel::cli::run(argc, argv); }
