#include <gtest/gtest.h>

#include <numeric>

#include "facelock/resample.hpp"
#include "support.hpp"

using namespace facelock;

TEST(Resample, IdentityMapIsExact) {
    auto x = fixtures::probe_image(1, 12);
    EXPECT_EQ(resample::apply(x, *resample::identity(12, 12)), x);
}

TEST(Resample, GaussianKernelIsNormalisedAndSymmetric) {
    for (int size : {1, 3, 5, 11}) {
        auto k = resample::gaussian_kernel_1d(size, 1.5);
        EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-15);
        for (int i = 0; i < size; ++i) EXPECT_EQ(k[i], k[size - 1 - i]);
    }
    EXPECT_THROW(resample::gaussian_kernel_1d(4, 1.0), ArgumentError);
    EXPECT_THROW(resample::gaussian_kernel_1d(3, 0.0), ArgumentError);
}

TEST(Resample, EveryRowSumsToOne) {
    // All maps here are convex combinations, so constants are preserved.
    for (const auto& m : {resample::gaussian_blur(9, 7, 5, 1.0), resample::rotation(9, 7, 23.0),
                          resample::resize_bilinear(9, 7, 13, 4), resample::gaussian_blur(2, 2, 5, 2.0)}) {
        for (std::size_t r = 0; r + 1 < m->row_begin.size(); ++r) {
            double s = 0.0;
            for (auto k = m->row_begin[r]; k < m->row_begin[r + 1]; ++k) s += m->weight[k];
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Resample, ConstantImageSurvivesEveryTransform) {
    ImageTensor c(10, 10, 0.37);
    for (const auto& m : {resample::gaussian_blur(10, 10, 5, 1.5), resample::rotation(10, 10, 17.0)}) {
        auto y = resample::apply(c, *m);
        for (double v : y.values()) EXPECT_NEAR(v, 0.37, 1e-12);
    }
    auto r = resample::apply(c, *resample::resize_bilinear(10, 10, 6, 15));
    EXPECT_EQ(r.height(), 6);
    EXPECT_EQ(r.width(), 15);
    for (double v : r.values()) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Resample, ZeroRotationIsIdentity) {
    auto x = fixtures::probe_image(2, 10);
    auto y = resample::apply(x, *resample::rotation(10, 10, 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(Resample, QuarterTurnPermutesPixels) {
    auto x = fixtures::probe_image(3, 9);
    auto y = resample::apply(x, *resample::rotation(9, 9, 90.0));
    // Counter-clockwise: output (y, x) samples source (x, 8 - y).
    for (int r = 0; r < 9; ++r)
        for (int c = 0; c < 9; ++c) EXPECT_NEAR(y.at(r, c, 0), x.at(c, 8 - r, 0), 1e-9);
}

TEST(Resample, ReflectIndexing) {
    EXPECT_EQ(resample::reflect_index(-1, 4), 1);
    EXPECT_EQ(resample::reflect_index(4, 4), 2);
    EXPECT_EQ(resample::reflect_index(7, 4), 1);
    EXPECT_EQ(resample::reflect_index(5, 1), 0);
    EXPECT_DOUBLE_EQ(resample::reflect_coord(-0.5, 4), 0.5);
    EXPECT_DOUBLE_EQ(resample::reflect_coord(3.5, 4), 2.5);
}

TEST(Resample, CropRejectsOutOfBoundsWindow) {
    EXPECT_THROW(resample::crop(8, 8, 2, 2, 7, 4), ArgumentError);
    auto x = fixtures::probe_image(4, 8);
    auto c = resample::apply(x, *resample::crop(8, 8, 2, 3, 4, 5));
    EXPECT_EQ(c.at(0, 0, 1), x.at(2, 3, 1));
    EXPECT_EQ(c.at(3, 4, 2), x.at(5, 7, 2));
}
