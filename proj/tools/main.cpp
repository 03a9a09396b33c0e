#include "cli_app.hpp"

int main(int argc, char** argv) { return dscope::cli::run(argc, argv); }
