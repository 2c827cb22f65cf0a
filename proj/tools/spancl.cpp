#include "spancl/cli.hpp"

int main(int argc, char** argv) { return spancl::dispatch(argc, argv); }
