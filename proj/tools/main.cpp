#include "sargam/pipeline.hpp"

int main(int argc, char** argv) { return sargam::cli(argc, argv); }
