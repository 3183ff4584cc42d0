#include "hanes/cli.hpp"

int main(int argc, char** argv) { return hanes::cli_main(argc, argv); }
