#include "trisk/cli.h"

int main(int argc, char** argv) { return trisk::cli::run(argc, argv); }
