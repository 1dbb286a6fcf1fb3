#include "gcs/cli.hpp"

int main(int argc, char** argv) { return gcs::cli::run(argc, argv); }
