#include "cli_app.hpp"

int main(int argc, char** argv) { return rawnoise::cli::run(argc, argv); }
