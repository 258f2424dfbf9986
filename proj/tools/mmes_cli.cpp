#include "commands.hpp"

int main(int argc, char** argv) { return mmes::cli::run(argc, argv); }
