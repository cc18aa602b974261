#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "facelock/autodiff.hpp"
#include "facelock/resample.hpp"
#include "facelock/toy_backend.hpp"

using namespace facelock;
using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    RngState rng(seed, "tensor");
    Tensor t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Max relative error between the analytic gradient and central differences over every entry.
double max_gradient_error(const std::function<Var(const Var&)>& f, const Tensor& x, double h = 1e-5) {
    auto leaf = Var::leaf(x);
    const Tensor g = ad::gradient(f(leaf), leaf);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor p = x, m = x;
        p[i] += h;
        m[i] -= h;
        const double num = (f(Var::constant(p)).item() - f(Var::constant(m)).item()) / (2 * h);
        const double scale = std::max({std::abs(num), std::abs(g[i]), 1e-4});
        worst = std::max(worst, std::abs(num - g[i]) / scale);
    }
    return worst;
}

}  // namespace

TEST(Autodiff, ElementwiseOpsMatchFiniteDifferences) {
    const Shape s{2, 3, 3};
    const auto x = random_tensor(s, 1);
    const auto c = Var::constant(random_tensor(s, 2));
    EXPECT_LT(max_gradient_error([&](const Var& v) { return ad::sum(ad::mul(ad::add(v, c), ad::sub(v, c))); }, x), 1e-6);
    EXPECT_LT(max_gradient_error([&](const Var& v) { return ad::sum(ad::tanh(ad::scale(v, 1.7))); }, x), 1e-6);
    EXPECT_LT(max_gradient_error([&](const Var& v) { return ad::mean(ad::sigmoid(ad::add_scalar(v, 0.3))); }, x), 1e-6);
    EXPECT_LT(max_gradient_error([&](const Var& v) { return ad::squared_distance(v, c); }, x), 1e-6);
    EXPECT_LT(max_gradient_error([&](const Var& v) { return ad::l2_norm(v); }, x), 1e-6);
    EXPECT_LT(max_gradient_error([&](const Var& v) { return ad::cosine_similarity(v, c); }, x), 1e-6);
    EXPECT_LT(max_gradient_error([&](const Var& v) { return ad::div_scalars(ad::dot(v, c), ad::sum_squares(v)); }, x), 1e-6);
}

TEST(Autodiff, SharedSubexpressionsAccumulate) {
    // f = sum(v*v) + sum(v) uses v three times.
    const auto x = random_tensor(Shape{1, 2, 2}, 3);
    auto f = [](const Var& v) { return ad::add(ad::sum(ad::mul(v, v)), ad::sum(v)); };
    auto leaf = Var::leaf(x);
    const auto g = ad::gradient(f(leaf), leaf);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], 2 * x[i] + 1, 1e-12);
}

TEST(Autodiff, LayersMatchFiniteDifferences) {
    RngState rng(4, "layers");
    const auto conv = toy::detail::random_conv(rng, 3, 4, 3, 2, 1);
    const auto lin = toy::detail::random_linear(rng, 4, 5);
    const auto x = random_tensor(Shape{3, 8, 8}, 5, 0.0, 1.0);
    auto f = [&](const Var& v) {
        auto h = ad::tanh(ad::conv2d(v, conv));
        auto u = ad::upsample_nearest(h, 2);
        auto p = ad::global_avg_pool(ad::tanh(u));
        return ad::sum_squares(ad::linear(p, lin));
    };
    EXPECT_LT(max_gradient_error(f, x), 1e-6);
}

TEST(Autodiff, ResampleMatchesFiniteDifferences) {
    const auto x = random_tensor(Shape{3, 10, 10}, 6, 0.0, 1.0);
    const auto rot = resample::rotation(10, 10, 7.0);
    const auto blur = resample::gaussian_blur(10, 10, 5, 1.5);
    auto f = [&](const Var& v) { return ad::sum_squares(ad::resample(ad::resample(v, rot), blur)); };
    EXPECT_LT(max_gradient_error(f, x), 1e-6);
}

TEST(Autodiff, CosineSimilarityOfZeroVectorThrows) {
    auto z = Var::constant(Tensor::vector({0.0, 0.0}));
    auto a = Var::constant(Tensor::vector({1.0, 0.0}));
    EXPECT_THROW(ad::cosine_similarity(z, a), UndefinedValueError);
}

TEST(Autodiff, L2NormGradientIsZeroAtOrigin) {
    auto leaf = Var::leaf(Tensor::vector({0.0, 0.0, 0.0}));
    const auto g = ad::gradient(ad::l2_norm(leaf), leaf);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], 0.0);
}

TEST(Autodiff, ImageLayoutRoundTrip) {
    ImageTensor img(3, 4);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i) / img.size();
    const auto t = ad::from_image(img);
    EXPECT_EQ(t.shape(), (Shape{3, 3, 4}));
    EXPECT_EQ(t.at(2, 1, 3), img.at(1, 3, 2));
    EXPECT_EQ(ad::to_image(t), img);
}

TEST(Autodiff, ConstantsDoNotRequireGradients) {
    auto c = Var::constant(Tensor::scalar(2.0));
    auto leaf = Var::leaf(Tensor::scalar(3.0));
    EXPECT_FALSE(ad::mul(c, c).requires_grad());
    EXPECT_TRUE(ad::mul(c, leaf).requires_grad());
    EXPECT_EQ(ad::gradient(ad::mul(c, leaf), leaf)[0], 2.0);
}
