#include "psyphy/cli.hpp"

int main(int argc, char** argv) { return psyphy::dispatch(argc, argv); }
