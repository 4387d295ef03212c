#include <gtest/gtest.h>

#include <cstring>
#include <iostream>

#include "golden.hpp"

// `--regen-golden` rewrites the pinned oracle file instead of running tests.
int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--regen-golden") == 0) {
      pgnniv::golden::write(PGNNIV_GOLDEN_FILE);
      std::cout << "wrote " << PGNNIV_GOLDEN_FILE << '\n';
      return 0;
    }
  }
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
