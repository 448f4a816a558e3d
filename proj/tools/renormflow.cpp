#include "renormflow/experiment.hpp"

int main(int argc, char** argv) { return renormflow::cli::main(argc, argv); }
