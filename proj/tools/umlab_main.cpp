#include "umlab/cli.hpp"

int main(int argc, char** argv) {
  return umlab::run_cli({argv + 1, argv + argc});
}
