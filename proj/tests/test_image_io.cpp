#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "facelock/image_io.hpp"
#include "support.hpp"

using namespace facelock;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto d = fs::temp_directory_path() / ("facelock_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST(ImageIo, ToByteRoundsHalfToEven) {
    EXPECT_EQ(io::to_byte(0.0), 0);
    EXPECT_EQ(io::to_byte(1.0), 255);
    EXPECT_EQ(io::to_byte(-0.3), 0);
    EXPECT_EQ(io::to_byte(1.7), 255);
    EXPECT_EQ(io::to_byte(0.5 / 255.0), 0);
    EXPECT_EQ(io::to_byte(1.5 / 255.0), 2);
    EXPECT_EQ(io::to_byte(100.0 / 255.0), 100);
}

TEST(ImageIo, QuantizeIsIdempotent) {
    auto x = fixtures::noise_image(1, 8, 0.0, 1.0);
    auto q = io::quantize8(x);
    EXPECT_EQ(io::quantize8(q), q);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(q[i] - x[i]), 0.5 / 255.0 + 1e-12);
}

TEST(ImageIo, PngRoundTripIsExactOnTheByteGrid) {
    auto dir = temp_dir();
    auto x = io::quantize8(fixtures::noise_image(2, 13, 0.0, 1.0));
    io::write_png(dir / "a.png", x);
    EXPECT_EQ(io::read_png(dir / "a.png"), x);
    EXPECT_EQ(io::read_image(dir / "a.png"), x);
    fs::remove_all(dir);
}

TEST(ImageIo, JpegErrorIsBounded) {
    auto x = fixtures::probe_image(3, 32);
    auto y = io::jpeg_roundtrip(x, 95);
    EXPECT_EQ(y.height(), 32);
    EXPECT_EQ(y.width(), 32);
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - y[i]) * (x[i] - y[i]);
    EXPECT_LT(mse / x.size(), 1e-3);
    EXPECT_THROW(io::jpeg_roundtrip(x, 0), ArgumentError);
}

TEST(ImageIo, ReadImageSniffsSignatureNotExtension) {
    auto dir = temp_dir();
    auto x = fixtures::probe_image(4, 16);
    auto bytes = io::encode_jpeg(x, 90);
    {
        std::ofstream out(dir / "looks_like.png", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    auto y = io::read_image(dir / "looks_like.png");
    EXPECT_EQ(y.height(), 16);
    {
        std::ofstream out(dir / "junk.png");
        out << "not an image";
    }
    EXPECT_THROW(io::read_image(dir / "junk.png"), io::ImageIoError);
    EXPECT_THROW(io::read_image(dir / "missing.png"), io::ImageIoError);
    fs::remove_all(dir);
}
