#include <gtest/gtest.h>

#include <filesystem>

#include "facelock/purification.hpp"
#include "support.hpp"

using namespace facelock;
namespace pf = facelock::purification;

TEST(Purify, LabelsRoundTrip) {
    for (const char* l : {"none", "blur", "rotate", "jpeg75", "jpeg90", "color_jitter", "external"})
        EXPECT_EQ(pf::label(pf::parse_label(l)), l);
    EXPECT_EQ(pf::parse_label("jpeg").jpeg_quality, 75);
    EXPECT_EQ(pf::parse_label("diffpure").kind, pf::Kind::external);
    EXPECT_THROW(pf::parse_label("jpeg0"), ArgumentError);
    EXPECT_THROW(pf::parse_label("jpegx"), ArgumentError);
    EXPECT_THROW(pf::parse_label("sharpen"), ArgumentError);
}

TEST(Purify, NoneIsBitIdentical) {
    auto x = fixtures::noise_image(1, 16);
    EXPECT_EQ(pf::purify(x, pf::parse_label("none")), x);
}

TEST(Purify, BlurKeepsConstantsAndMean) {
    ImageTensor c(16, 16, 0.3);
    for (double v : pf::purify(c, pf::parse_label("blur")).values()) EXPECT_NEAR(v, 0.3, 1e-12);
    auto x = fixtures::probe_image(2, 32);
    auto y = pf::purify(x, pf::parse_label("blur"));
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    EXPECT_NEAR(mx / x.size(), my / y.size(), 1e-3);
}

TEST(Purify, StochasticKindsAreDeterministicPerStream) {
    auto x = fixtures::probe_image(3, 32);
    for (const char* l : {"rotate", "color_jitter"}) {
        auto a = pf::parse_label(l), b = pf::parse_label(l), c = pf::parse_label(l);
        a.rng = b.rng = RngState(4, "purify/img/x");
        c.rng = RngState(5, "purify/img/x");
        EXPECT_EQ(pf::purify(x, a), pf::purify(x, b)) << l;
        EXPECT_NE(pf::purify(x, a), pf::purify(x, c)) << l;
    }
}

TEST(Purify, SecondJpegPassChangesLess) {
    auto x = fixtures::probe_image(6, 32);
    auto s = pf::parse_label("jpeg90");
    auto once = pf::purify(x, s);
    auto twice = pf::purify(once, s);
    EXPECT_LT(squared_l2_distance(once, twice), squared_l2_distance(x, once));
}

TEST(Purify, OutputsStayInRangeWithSameShape) {
    auto x = fixtures::noise_image(7, 16, 0.0, 1.0);
    for (const char* l : {"none", "blur", "rotate", "jpeg50", "color_jitter"}) {
        auto y = pf::purify(x, pf::parse_label(l));
        EXPECT_EQ(y.height(), 16);
        EXPECT_EQ(y.width(), 16);
        EXPECT_TRUE(y.in_unit_range()) << l;
    }
}

TEST(Purify, ExternalHookFailureFallsBackWithWarning) {
    auto x = fixtures::probe_image(8, 16);
    auto s = pf::parse_label("external");
    std::vector<std::string> warnings;
    EXPECT_EQ(pf::purify(x, s, &warnings), x);
    ASSERT_EQ(warnings.size(), 1u);
    s.external_command = "false {input} {output}";
    warnings.clear();
    EXPECT_EQ(pf::purify(x, s, &warnings), x);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(Purify, ExternalHookRoundTripsThroughFiles) {
    auto x = io::quantize8(fixtures::probe_image(9, 16));
    auto s = pf::parse_label("external");
    s.external_command = "cp {input} {output}";
    std::vector<std::string> warnings;
    EXPECT_EQ(pf::purify(x, s, &warnings), x);
    EXPECT_TRUE(warnings.empty());
}

TEST(Purify, ValidationRejectsBadParameters) {
    auto s = pf::parse_label("blur");
    s.blur_kernel = 4;
    EXPECT_THROW(pf::purify(fixtures::probe_image(0, 16), s), ArgumentError);
}
