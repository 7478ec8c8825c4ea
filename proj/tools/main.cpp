#include "optfield/harness.hpp"

int main(int argc, char** argv) { return optfield::run(argc, argv); }
