#include "slotmotion/cli/app.hpp"

int main(int argc, char** argv) { return slotmotion::cli::run(argc, argv); }
