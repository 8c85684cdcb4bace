#include "blink/cli.hpp"

int main(int argc, char** argv) { return blink::cli_main(argc, argv); }
