#pragma once

// Minimal reverse-mode automatic differentiation over CHW double tensors.
//
// Every attack differentiates a scalar objective with respect to the input image
// through the latent codec, the face embedder, the feature extractor and, for EOT,
// through input transformations. Graphs are built eagerly per forward pass and
// discarded afterwards; nodes are immutable once created, so independent graphs may
// be built concurrently from the same (immutable) model weights.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "facelock/core.hpp"

namespace facelock::ad {

struct Shape {
    int channels = 1;
    int height = 1;
    int width = 1;

    std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.channels) + "," + std::to_string(s.height) + "," + std::to_string(s.width) + ")";
}

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
    Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size()) {
            throw ArgumentError("Tensor: data size " + std::to_string(data_.size()) + " does not match shape " +
                                to_string(shape_));
        }
    }
    static Tensor vector(std::vector<double> values) {
        const int n = static_cast<int>(values.size());
        return Tensor(Shape{n, 1, 1}, std::move(values));
    }
    static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1}, v); }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x]; }
    double at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
    }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_{0, 0, 0};
    std::vector<double> data_;
};

inline Tensor from_image(const ImageTensor& img) {
    const int h = img.height(), w = img.width();
    Tensor t(Shape{3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = img.at(y, x, c);
    return t;
}

inline ImageTensor to_image(const Tensor& t) {
    if (t.shape().channels != 3) throw ArgumentError("to_image: tensor must have 3 channels");
    const int h = t.shape().height, w = t.shape().width;
    ImageTensor img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = t.at(c, y, x);
    return img;
}

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;
    std::vector<NodePtr> inputs;
    // Reads this->grad and accumulates into inputs[i]->grad.
    std::function<void(Node&)> backward;
    bool requires_grad = false;

    Tensor& grad_buffer() {
        if (grad.empty()) grad = Tensor(value.shape(), 0.0);
        return grad;
    }
};

class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    static Var constant(Tensor value) {
        auto n = std::make_shared<Node>();
        n->value = std::move(value);
        return Var(std::move(n));
    }
    static Var leaf(Tensor value) {
        auto n = std::make_shared<Node>();
        n->value = std::move(value);
        n->requires_grad = true;
        return Var(std::move(n));
    }

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    double item() const {
        if (node_->value.size() != 1) throw ArgumentError("Var::item: not a scalar");
        return node_->value[0];
    }
    bool requires_grad() const { return node_->requires_grad; }
    const NodePtr& node() const { return node_; }
    bool defined() const { return static_cast<bool>(node_); }

private:
    NodePtr node_;
};

// Creates an op node. The backward closure is dropped when no input needs gradients.
inline Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (auto& in : inputs) {
        n->requires_grad = n->requires_grad || in.requires_grad();
        n->inputs.push_back(in.node());
    }
    if (n->requires_grad) {
        n->backward = std::move(backward);
    } else {
        n->inputs.clear();
    }
    return Var(std::move(n));
}

// Extension point for externally implemented differentiable models: the caller supplies
// the forward value and a vector-Jacobian product per input.
inline Var custom(std::vector<Var> inputs, Tensor value,
                  std::function<std::vector<Tensor>(const Tensor& upstream)> vjp) {
    return make_op(std::move(value), std::move(inputs), [vjp = std::move(vjp)](Node& self) {
        auto grads = vjp(self.grad);
        for (std::size_t i = 0; i < self.inputs.size() && i < grads.size(); ++i) {
            auto& in = *self.inputs[i];
            if (!in.requires_grad) continue;
            auto& g = in.grad_buffer();
            if (grads[i].size() != g.size()) throw ArgumentError("custom op: vjp size mismatch");
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += grads[i][k];
        }
    });
}

// Gradients of a scalar `output` with respect to each of `wrt`.
inline std::vector<Tensor> gradients(const Var& output, const std::vector<Var>& wrt) {
    if (output.value().size() != 1) throw ArgumentError("gradients: output must be scalar");

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{output.node().get(), 0}};
    seen.insert(output.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) n->grad = Tensor();
    output.node()->grad = Tensor(output.shape(), 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
    std::vector<Tensor> result;
    result.reserve(wrt.size());
    for (const auto& w : wrt) {
        const auto& g = w.node()->grad;
        result.push_back(g.empty() ? Tensor(w.shape(), 0.0) : g);
    }
    for (Node* n : order) {
        if (n->backward) n->grad = Tensor();
    }
    return result;
}

inline Tensor gradient(const Var& output, const Var& wrt) { return gradients(output, {wrt}).front(); }

namespace detail {

inline void require_same(const Var& a, const Var& b, const char* op) {
    if (!(a.shape() == b.shape())) {
        throw ArgumentError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                            to_string(b.shape()));
    }
}

inline void accumulate(Node& in, const std::function<double(std::size_t)>& f) {
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += f(k);
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    detail::require_same(a, b, "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return self.grad[k]; });
        detail::accumulate(*self.inputs[1], [&](std::size_t k) { return self.grad[k]; });
    });
}

inline Var sub(const Var& a, const Var& b) {
    detail::require_same(a, b, "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return self.grad[k]; });
        detail::accumulate(*self.inputs[1], [&](std::size_t k) { return -self.grad[k]; });
    });
}

inline Var mul(const Var& a, const Var& b) {
    detail::require_same(a, b, "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return self.grad[k] * bv[k]; });
        detail::accumulate(*self.inputs[1], [&](std::size_t k) { return self.grad[k] * av[k]; });
    });
}

inline Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.values()) v *= s;
    return make_op(std::move(out), {a}, [s](Node& self) {
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return self.grad[k] * s; });
    });
}

inline Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.values()) v += s;
    return make_op(std::move(out), {a}, [](Node& self) {
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return self.grad[k]; });
    });
}

inline Var tanh(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.values()) v = std::tanh(v);
    return make_op(std::move(out), {a}, [](Node& self) {
        const auto& y = self.value;
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return self.grad[k] * (1.0 - y[k] * y[k]); });
    });
}

inline Var sigmoid(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
    return make_op(std::move(out), {a}, [](Node& self) {
        const auto& y = self.value;
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return self.grad[k] * y[k] * (1.0 - y[k]); });
    });
}

// ---- reductions ------------------------------------------------------------

inline Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return make_op(Tensor::scalar(s), {a}, [](Node& self) {
        const double g = self.grad[0];
        detail::accumulate(*self.inputs[0], [g](std::size_t) { return g; });
    });
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

inline Var sum_squares(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v * v;
    return make_op(Tensor::scalar(s), {a}, [](Node& self) {
        const double g = self.grad[0];
        const auto& x = self.inputs[0]->value;
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return 2.0 * g * x[k]; });
    });
}

inline Var squared_distance(const Var& a, const Var& b) { return sum_squares(sub(a, b)); }

inline Var dot(const Var& a, const Var& b) { return sum(mul(a, b)); }

// Euclidean norm; the subgradient at the origin is taken to be zero.
inline Var l2_norm(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v * v;
    const double n = std::sqrt(s);
    return make_op(Tensor::scalar(n), {a}, [n](Node& self) {
        if (n == 0.0) return;
        const double g = self.grad[0];
        const auto& x = self.inputs[0]->value;
        detail::accumulate(*self.inputs[0], [&](std::size_t k) { return g * x[k] / n; });
    });
}

// Scalar-by-scalar ops used to assemble cosine similarity.
inline Var mul_scalars(const Var& a, const Var& b) { return mul(a, b); }

inline Var div_scalars(const Var& a, const Var& b) {
    if (a.value().size() != 1 || b.value().size() != 1) throw ArgumentError("div_scalars: operands must be scalars");
    const double av = a.item(), bv = b.item();
    return make_op(Tensor::scalar(av / bv), {a, b}, [av, bv](Node& self) {
        const double g = self.grad[0];
        detail::accumulate(*self.inputs[0], [&](std::size_t) { return g / bv; });
        detail::accumulate(*self.inputs[1], [&](std::size_t) { return -g * av / (bv * bv); });
    });
}

// a.b / (|a||b|); throws UndefinedValueError on a zero-norm operand.
inline Var cosine_similarity(const Var& a, const Var& b) {
    detail::require_same(a, b, "cosine_similarity");
    Var na = l2_norm(a);
    Var nb = l2_norm(b);
    if (na.item() == 0.0 || nb.item() == 0.0) throw UndefinedValueError("cosine_similarity: zero-norm vector");
    return div_scalars(dot(a, b), mul_scalars(na, nb));
}

// ---- layers ----------------------------------------------------------------

// Convolution weights, layout [out][in][k][k], with fixed (non-trained) values.
struct ConvWeights {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    double w(int o, int i, int ky, int kx) const {
        return weight[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
    }
    Shape output_shape(const Shape& in) const {
        return Shape{out_channels, (in.height + 2 * padding - kernel) / stride + 1,
                     (in.width + 2 * padding - kernel) / stride + 1};
    }
};

// Zero-padded 2-D convolution; gradients flow to the input only.
inline Var conv2d(const Var& x, const ConvWeights& cw) {
    const Shape in = x.shape();
    if (in.channels != cw.in_channels) {
        throw ArgumentError("conv2d: expected " + std::to_string(cw.in_channels) + " input channels, got " +
                            std::to_string(in.channels));
    }
    const Shape os = cw.output_shape(in);
    if (os.height <= 0 || os.width <= 0) throw ArgumentError("conv2d: input too small for kernel");
    Tensor out(os);
    const auto& xv = x.value();
    for (int o = 0; o < os.channels; ++o) {
        const double b = cw.bias.empty() ? 0.0 : cw.bias[o];
        for (int oy = 0; oy < os.height; ++oy) {
            for (int ox = 0; ox < os.width; ++ox) {
                double acc = b;
                for (int i = 0; i < in.channels; ++i) {
                    for (int ky = 0; ky < cw.kernel; ++ky) {
                        const int iy = oy * cw.stride + ky - cw.padding;
                        if (iy < 0 || iy >= in.height) continue;
                        for (int kx = 0; kx < cw.kernel; ++kx) {
                            const int ix = ox * cw.stride + kx - cw.padding;
                            if (ix < 0 || ix >= in.width) continue;
                            acc += cw.w(o, i, ky, kx) * xv.at(i, iy, ix);
                        }
                    }
                }
                out.at(o, oy, ox) = acc;
            }
        }
    }
    // The weights are owned by the model, which outlives every graph built from it.
    const ConvWeights* wp = &cw;
    return make_op(std::move(out), {x}, [wp, in, os](Node& self) {
        auto& src = *self.inputs[0];
        if (!src.requires_grad) return;
        auto& g = src.grad_buffer();
        const auto& cw = *wp;
        for (int o = 0; o < os.channels; ++o) {
            for (int oy = 0; oy < os.height; ++oy) {
                for (int ox = 0; ox < os.width; ++ox) {
                    const double up = self.grad.at(o, oy, ox);
                    if (up == 0.0) continue;
                    for (int i = 0; i < in.channels; ++i) {
                        for (int ky = 0; ky < cw.kernel; ++ky) {
                            const int iy = oy * cw.stride + ky - cw.padding;
                            if (iy < 0 || iy >= in.height) continue;
                            for (int kx = 0; kx < cw.kernel; ++kx) {
                                const int ix = ox * cw.stride + kx - cw.padding;
                                if (ix < 0 || ix >= in.width) continue;
                                g.at(i, iy, ix) += up * cw.w(o, i, ky, kx);
                            }
                        }
                    }
                }
            }
        }
    });
}

inline Var upsample_nearest(const Var& x, int factor) {
    const Shape in = x.shape();
    const Shape os{in.channels, in.height * factor, in.width * factor};
    Tensor out(os);
    for (int c = 0; c < os.channels; ++c)
        for (int y = 0; y < os.height; ++y)
            for (int xx = 0; xx < os.width; ++xx) out.at(c, y, xx) = x.value().at(c, y / factor, xx / factor);
    return make_op(std::move(out), {x}, [factor, os](Node& self) {
        auto& src = *self.inputs[0];
        auto& g = src.grad_buffer();
        for (int c = 0; c < os.channels; ++c)
            for (int y = 0; y < os.height; ++y)
                for (int xx = 0; xx < os.width; ++xx) g.at(c, y / factor, xx / factor) += self.grad.at(c, y, xx);
    });
}

// (C,H,W) -> (C,1,1)
inline Var global_avg_pool(const Var& x) {
    const Shape in = x.shape();
    const double inv = 1.0 / static_cast<double>(in.plane());
    Tensor out(Shape{in.channels, 1, 1});
    for (int c = 0; c < in.channels; ++c) {
        double s = 0.0;
        for (int y = 0; y < in.height; ++y)
            for (int xx = 0; xx < in.width; ++xx) s += x.value().at(c, y, xx);
        out[c] = s * inv;
    }
    return make_op(std::move(out), {x}, [in, inv](Node& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (int c = 0; c < in.channels; ++c)
            for (int y = 0; y < in.height; ++y)
                for (int xx = 0; xx < in.width; ++xx) g.at(c, y, xx) += self.grad[c] * inv;
    });
}

// Dense layer on the flattened input; weight layout [out][in].
struct LinearWeights {
    int in_features = 0;
    int out_features = 0;
    std::vector<double> weight;
    std::vector<double> bias;
};

inline Var linear(const Var& x, const LinearWeights& lw) {
    if (static_cast<int>(x.value().size()) != lw.in_features) throw ArgumentError("linear: input size mismatch");
    Tensor out(Shape{lw.out_features, 1, 1});
    const auto& xv = x.value();
    for (int o = 0; o < lw.out_features; ++o) {
        double acc = lw.bias.empty() ? 0.0 : lw.bias[o];
        for (int i = 0; i < lw.in_features; ++i) acc += lw.weight[static_cast<std::size_t>(o) * lw.in_features + i] * xv[i];
        out[o] = acc;
    }
    const LinearWeights* wp = &lw;
    return make_op(std::move(out), {x}, [wp](Node& self) {
        auto& g = self.inputs[0]->grad_buffer();
        const auto& lw = *wp;
        for (int o = 0; o < lw.out_features; ++o) {
            const double up = self.grad[o];
            for (int i = 0; i < lw.in_features; ++i) g[i] += up * lw.weight[static_cast<std::size_t>(o) * lw.in_features + i];
        }
    });
}

// Sparse linear resampling applied independently to every channel plane:
// out_plane[j] = sum_k weight_k * in_plane[index_k] over the taps of row j (CSR).
// Expresses crops, resizes, reflect-padded blurs and bilinear rotations.
struct PlaneMap {
    int in_height = 0, in_width = 0;
    int out_height = 0, out_width = 0;
    std::vector<std::size_t> row_begin;  // size out_height*out_width + 1
    std::vector<std::size_t> index;
    std::vector<double> weight;

    std::size_t out_plane() const { return static_cast<std::size_t>(out_height) * out_width; }
    std::size_t in_plane() const { return static_cast<std::size_t>(in_height) * in_width; }
};

inline Tensor apply_plane_map(const Tensor& x, const PlaneMap& m) {
    const Shape in = x.shape();
    if (in.height != m.in_height || in.width != m.in_width) throw ArgumentError("apply_plane_map: input shape mismatch");
    Tensor out(Shape{in.channels, m.out_height, m.out_width});
    const std::size_t ip = m.in_plane(), op = m.out_plane();
    for (int c = 0; c < in.channels; ++c) {
        const double* src = x.values().data() + c * ip;
        double* dst = out.values().data() + c * op;
        for (std::size_t j = 0; j < op; ++j) {
            double acc = 0.0;
            for (std::size_t k = m.row_begin[j]; k < m.row_begin[j + 1]; ++k) acc += m.weight[k] * src[m.index[k]];
            dst[j] = acc;
        }
    }
    return out;
}

// The map is shared so graphs may outlive the caller's copy.
inline Var resample(const Var& x, std::shared_ptr<const PlaneMap> map) {
    Tensor out = apply_plane_map(x.value(), *map);
    const int channels = x.shape().channels;
    return make_op(std::move(out), {x}, [map, channels](Node& self) {
        auto& g = self.inputs[0]->grad_buffer();
        const auto& m = *map;
        const std::size_t ip = m.in_plane(), op = m.out_plane();
        for (int c = 0; c < channels; ++c) {
            double* dst = g.values().data() + c * ip;
            const double* up = self.grad.values().data() + c * op;
            for (std::size_t j = 0; j < op; ++j)
                for (std::size_t k = m.row_begin[j]; k < m.row_begin[j + 1]; ++k) dst[m.index[k]] += m.weight[k] * up[j];
        }
    });
}

}  // namespace facelock::ad
