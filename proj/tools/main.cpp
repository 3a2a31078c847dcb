#include "probebench/runner.hpp"

int main(int argc, char** argv) {
  return probebench::run_cli(argc, argv);
}
