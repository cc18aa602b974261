// Protects a synthetic portrait with FaceLock on the toy backend and compares how much
// identity survives an edit with and without the protection.

#include <cmath>
#include <cstdio>

#include "facelock/facelock.hpp"

using namespace facelock;

int main() {
    const int size = 32;
    const auto bundle = toy::make_toy_bundle(7, size);

    // A smooth face-like blob on a striped background.
    ImageTensor x(size, size);
    for (int y = 0; y < size; ++y)
        for (int c = 0; c < size; ++c) {
            const double dy = (y - 15.5) / 9.0, dx = (c - 15.5) / 7.0;
            const double face = std::exp(-(dx * dx + dy * dy));
            x.at(y, c, 0) = 0.25 + 0.6 * face;
            x.at(y, c, 1) = 0.2 + 0.45 * face + 0.1 * std::sin(c * 0.8);
            x.at(y, c, 2) = 0.5 - 0.3 * face + 0.1 * std::cos(y * 0.6);
        }

    AttackConfig cfg;
    cfg.rng = RngState(0, "demo");
    const auto res = facelock_protect(bundle, x, cfg);
    std::printf("linf(delta) = %.4f (budget %.4f)\n", res.perturbation.linf(), cfg.epsilon);
    std::printf("objective: step 0 %.4f, last step %.4f\n", res.loss_trace.front().objective,
                res.loss_trace.back().objective);

    const EditParams params{size, 50, 1.5, 7.5};
    const std::string prompt = "Let the person wear sunglasses";
    const RngState stream(0, "demo/edit");
    const auto clean_edit = bundle.editor->edit(x, prompt, params, stream);
    const auto prot_edit = bundle.editor->edit(res.protected_image, prompt, params, stream);
    std::printf("FR(source, edit of clean)     = %.4f\n", metrics::fr_score(bundle, x, clean_edit));
    std::printf("FR(source, edit of protected) = %.4f\n", metrics::fr_score(bundle, x, prot_edit));
    std::printf("LPIPS(clean edit, protected edit) = %.4f\n", metrics::lpips(bundle, clean_edit, prot_edit));
    return 0;
}
