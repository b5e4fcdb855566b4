#include "ptplaq/cli.hpp"

int main(int argc, char** argv) { return ptplaq::cli::main_entry(argc, argv); }
