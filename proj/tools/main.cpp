#include "cli.hpp"

int main(int argc, char** argv) { return selfdesc::cli::dispatch(argc, argv); }
