#include <gtest/gtest.h>

#include "mdn/blas.hpp"

int main(int argc, char** argv) {
    mdn::fix_blas_core_detection(argv);
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
