#include "scenario.hpp"

int main(int argc, char** argv) { return rqdet::cli::main(argc, argv); }
