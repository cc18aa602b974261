// Writes N synthetic 64x64 portraits (an elliptical face with eyes and a mouth on a
// textured background) so the CLI can be tried without a real dataset.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "facelock/facelock.hpp"

using namespace facelock;

namespace {

ImageTensor portrait(std::uint64_t seed, int size) {
    RngState rng(seed, "portrait");
    const double cy = size * rng.uniform(0.45, 0.55), cx = size * rng.uniform(0.45, 0.55);
    const double ry = size * rng.uniform(0.26, 0.32), rx = size * rng.uniform(0.19, 0.24);
    const double skin[3] = {rng.uniform(0.55, 0.9), rng.uniform(0.4, 0.7), rng.uniform(0.3, 0.55)};
    const double bg[3] = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    const double freq = rng.uniform(0.2, 0.6);
    ImageTensor x(size, size);
    for (int y = 0; y < size; ++y)
        for (int c = 0; c < size; ++c) {
            const double dy = (y - cy) / ry, dx = (c - cx) / rx;
            const double face = 1.0 / (1.0 + std::exp(12.0 * (dx * dx + dy * dy - 1.0)));
            const double ey = (y - (cy - 0.25 * ry)) / (0.08 * ry);
            const double el = (c - (cx - 0.4 * rx)) / (0.15 * rx), er = (c - (cx + 0.4 * rx)) / (0.15 * rx);
            const double eyes = std::exp(-(ey * ey + el * el)) + std::exp(-(ey * ey + er * er));
            const double my = (y - (cy + 0.45 * ry)) / (0.06 * ry), mx = (c - cx) / (0.35 * rx);
            const double mouth = std::exp(-(my * my + mx * mx));
            for (int k = 0; k < 3; ++k) {
                const double back = bg[k] + 0.08 * std::sin(freq * (c + 2 * k) + 0.5 * y);
                double v = face * skin[k] + (1.0 - face) * back;
                v -= 0.5 * eyes * face;
                v -= (k == 0 ? 0.1 : 0.3) * mouth * face;
                x.at(y, c, k) = std::clamp(v, 0.0, 1.0);
            }
        }
    return x;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s OUT_DIR [COUNT=6]\n", argv[0]);
        return 2;
    }
    const std::filesystem::path out = argv[1];
    const int count = argc > 2 ? std::atoi(argv[2]) : 6;
    std::filesystem::create_directories(out);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "face%03d.png", i);
        io::write_png(out / name, portrait(static_cast<std::uint64_t>(i), 64));
    }
    std::printf("wrote %d portraits to %s\n", count, out.string().c_str());
}
