#include "commands.hpp"

int main(int argc, char **argv) { return memoplan::cli::run(argc, argv); }
