#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "amad/errors.hpp"
#include "amad/random.hpp"

namespace amad {

// ---------------------------------------------------------------------------
// Tensor: dense row-major double storage. Plain value type; autodiff happens
// on a Tape, which copies tensors in as leaves.
// ---------------------------------------------------------------------------

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> v, bool rg = false)
        : shape(std::move(s)), values(std::move(v)), requires_grad(rg) {
        if (numel_of(shape) != values.size())
            throw std::invalid_argument("Tensor: shape/value size mismatch");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<std::size_t> s, double v) {
        std::size_t n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(n, v));
    }

    /// [1 x n] row vector.
    static Tensor row_vector(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor({1, n}, std::move(v));
    }

    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v) {
        return Tensor({r, c}, std::move(v));
    }

    std::size_t numel() const { return values.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill_uniform(RngStream& rng, double lo, double hi) {
        for (double& v : values) v = rng.uniform(lo, hi);
    }
};

inline std::string shape_str(std::span<const std::size_t> s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// I.i.d. N(0,1) entries; advances rng deterministically.
inline Tensor gaussian_sample(std::vector<std::size_t> shape, RngStream& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values) v = rng.normal();
    return t;
}

// ---------------------------------------------------------------------------
// Tape: reverse-mode autodiff over a recorded computation. Nodes are appended
// in evaluation order, so reverse iteration is a valid topological order for
// the backward sweep. Internals are open; ops are free functions building on
// push()/node()/grad_of().
// ---------------------------------------------------------------------------

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;
};

class Tape {
public:
    struct Node {
        std::vector<std::size_t> shape;
        std::vector<double> value;
        bool needs_grad = false;
        std::function<void(Tape&, std::uint32_t)> backprop;
    };

    Var leaf(const Tensor& t) { return leaf(t, t.requires_grad); }

    Var leaf(const Tensor& t, bool requires_grad) {
        Node n;
        n.shape = t.shape;
        n.value = t.values;
        n.needs_grad = requires_grad;
        return push(std::move(n));
    }

    Var scalar(double v, bool requires_grad = false) {
        return leaf(Tensor({1, 1}, {v}), requires_grad);
    }

    std::size_t size() const { return nodes_.size(); }

    Node& node(Var v) {
        check(v);
        return nodes_[v.id];
    }
    const Node& node(Var v) const {
        check(v);
        return nodes_[v.id];
    }
    Node& node(std::uint32_t id) { return nodes_[id]; }

    const std::vector<std::size_t>& shape(Var v) const { return node(v).shape; }
    const std::vector<double>& value(Var v) const { return node(v).value; }

    double scalar_value(Var v) const {
        if (node(v).value.size() != 1)
            throw std::invalid_argument("scalar_value: tensor has " +
                                        std::to_string(node(v).value.size()) + " elements");
        return node(v).value[0];
    }

    Var push(Node&& n) {
        nodes_.push_back(std::move(n));
        grads_.emplace_back();
        return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    /// Gradient buffer of a node, zero-initialized on first touch.
    std::vector<double>& grad_of(std::uint32_t id) {
        if (grads_[id].empty()) grads_[id].assign(nodes_[id].value.size(), 0.0);
        return grads_[id];
    }

    const std::vector<double>& grad_raw(std::uint32_t id) const { return grads_[id]; }

    /// Reverse sweep from a scalar loss. Populates gradients for every
    /// reachable node that needs one; unreached gradients stay zero.
    void backward(Var loss) {
        Node& l = node(loss);
        if (l.value.size() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got " +
                                        shape_str(l.shape));
        grad_of(loss.id)[0] += 1.0;
        for (std::uint32_t id = loss.id + 1; id-- > 0;) {
            Node& n = nodes_[id];
            if (!n.needs_grad || !n.backprop || grads_[id].empty()) continue;
            n.backprop(*this, id);
        }
    }

    /// Gradient of a node as a tensor (zeros if nothing flowed into it).
    Tensor grad(Var v) const {
        const Node& n = node(v);
        Tensor g = Tensor::zeros(n.shape);
        if (v.id < grads_.size() && !grads_[v.id].empty()) g.values = grads_[v.id];
        return g;
    }

    Tensor value_tensor(Var v) const {
        const Node& n = node(v);
        return Tensor(n.shape, n.value);
    }

private:
    std::deque<Node> nodes_;
    std::deque<std::vector<double>> grads_;  // parallel to nodes_, lazily filled

    void check(Var v) const {
        if (v.tape != this || v.id >= nodes_.size())
            throw std::invalid_argument("Var does not belong to this tape");
    }
};

namespace detail {

inline void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw std::invalid_argument("operands on different tapes");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations. Each forwards eagerly and records a closure pulling the output
// gradient into its parents.
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
    detail::require_same_tape(a, b);
    Tape& t = *a.tape;
    const auto& na = t.node(a);
    const auto& nb = t.node(b);
    if (na.shape.size() != 2 || nb.shape.size() != 2 || na.shape[1] != nb.shape[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(na.shape) +
                                    " and " + shape_str(nb.shape));
    const std::size_t m = na.shape[0], k = na.shape[1], n = nb.shape[1];
    Tape::Node out;
    out.shape = {m, n};
    out.value.assign(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = na.value[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
                out.value[i * n + j] += av * nb.value[p * n + j];
        }
    out.needs_grad = na.needs_grad || nb.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t ia = a.id, ib = b.id;
        out.backprop = [ia, ib, m, k, n](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            if (tp.node(ia).needs_grad) {
                auto& ga = tp.grad_of(ia);
                const auto& bv = tp.node(ib).value;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j)
                            acc += g[i * n + j] * bv[p * n + j];
                        ga[i * k + p] += acc;
                    }
            }
            if (tp.node(ib).needs_grad) {
                auto& gb = tp.grad_of(ib);
                const auto& av = tp.node(ia).value;
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < m; ++i) {
                        const double aip = av[i * k + p];
                        if (aip == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j)
                            gb[p * n + j] += aip * g[i * n + j];
                    }
            }
        };
    }
    return t.push(std::move(out));
}

inline Var transpose(Var a) {
    Tape& t = *a.tape;
    const auto& na = t.node(a);
    if (na.shape.size() != 2) throw std::invalid_argument("transpose: need 2-d tensor");
    const std::size_t r = na.shape[0], c = na.shape[1];
    Tape::Node out;
    out.shape = {c, r};
    out.value.resize(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.value[j * r + i] = na.value[i * c + j];
    out.needs_grad = na.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t ia = a.id;
        out.backprop = [ia, r, c](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            auto& ga = tp.grad_of(ia);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
        };
    }
    return t.push(std::move(out));
}

namespace detail {

template <typename Fwd, typename Bwd>
Var binary_elementwise(Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
    require_same_tape(a, b);
    Tape& t = *a.tape;
    const auto& na = t.node(a);
    const auto& nb = t.node(b);
    if (na.shape != nb.shape)
        throw std::invalid_argument(std::string(name) + ": shape mismatch " +
                                    shape_str(na.shape) + " vs " + shape_str(nb.shape));
    Tape::Node out;
    out.shape = na.shape;
    out.value.resize(na.value.size());
    for (std::size_t i = 0; i < out.value.size(); ++i)
        out.value[i] = fwd(na.value[i], nb.value[i]);
    out.needs_grad = na.needs_grad || nb.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t ia = a.id, ib = b.id;
        out.backprop = [ia, ib, bwd](Tape& tp, std::uint32_t self) {
            bwd(tp, ia, ib, tp.grad_raw(self));
        };
    }
    return t.push(std::move(out));
}

template <typename Fwd, typename Dv>
Var unary_elementwise(Var a, Fwd fwd, Dv dval) {
    Tape& t = *a.tape;
    const auto& na = t.node(a);
    Tape::Node out;
    out.shape = na.shape;
    out.value.resize(na.value.size());
    for (std::size_t i = 0; i < out.value.size(); ++i) out.value[i] = fwd(na.value[i]);
    out.needs_grad = na.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t ia = a.id;
        out.backprop = [ia, dval](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            const auto& x = tp.node(ia).value;
            const auto& y = tp.node(self).value;
            auto& ga = tp.grad_of(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dval(x[i], y[i]);
        };
    }
    return t.push(std::move(out));
}

}  // namespace detail

inline Var add(Var a, Var b) {
    return detail::binary_elementwise(
        a, b, "add", [](double x, double y) { return x + y; },
        [](Tape& tp, std::uint32_t ia, std::uint32_t ib, const std::vector<double>& g) {
            if (tp.node(ia).needs_grad) {
                auto& ga = tp.grad_of(ia);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (tp.node(ib).needs_grad) {
                auto& gb = tp.grad_of(ib);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
}

inline Var sub(Var a, Var b) {
    return detail::binary_elementwise(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](Tape& tp, std::uint32_t ia, std::uint32_t ib, const std::vector<double>& g) {
            if (tp.node(ia).needs_grad) {
                auto& ga = tp.grad_of(ia);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (tp.node(ib).needs_grad) {
                auto& gb = tp.grad_of(ib);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
}

inline Var mul(Var a, Var b) {
    return detail::binary_elementwise(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](Tape& tp, std::uint32_t ia, std::uint32_t ib, const std::vector<double>& g) {
            const auto& av = tp.node(ia).value;
            const auto& bv = tp.node(ib).value;
            if (tp.node(ia).needs_grad) {
                auto& ga = tp.grad_of(ia);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
            }
            if (tp.node(ib).needs_grad) {
                auto& gb = tp.grad_of(ib);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
            }
        });
}

/// [r x c] + [1 x c], the bias broadcast.
inline Var add_rowvec(Var m, Var rowv) {
    detail::require_same_tape(m, rowv);
    Tape& t = *m.tape;
    const auto& nm = t.node(m);
    const auto& nr = t.node(rowv);
    if (nm.shape.size() != 2 || nr.shape.size() != 2 || nr.shape[0] != 1 ||
        nr.shape[1] != nm.shape[1])
        throw std::invalid_argument("add_rowvec: incompatible shapes " + shape_str(nm.shape) +
                                    " and " + shape_str(nr.shape));
    const std::size_t r = nm.shape[0], c = nm.shape[1];
    Tape::Node out;
    out.shape = nm.shape;
    out.value.resize(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out.value[i * c + j] = nm.value[i * c + j] + nr.value[j];
    out.needs_grad = nm.needs_grad || nr.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t im = m.id, ir = rowv.id;
        out.backprop = [im, ir, r, c](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            if (tp.node(im).needs_grad) {
                auto& gm = tp.grad_of(im);
                for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
            }
            if (tp.node(ir).needs_grad) {
                auto& gr = tp.grad_of(ir);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
            }
        };
    }
    return t.push(std::move(out));
}

inline Var scale(Var a, double s) {
    return detail::unary_elementwise(
        a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Var one_minus(Var a) {
    return detail::unary_elementwise(
        a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

inline Var tanh(Var a) {
    return detail::unary_elementwise(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
    return detail::unary_elementwise(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Var leaky_relu(Var a, double slope) {
    return detail::unary_elementwise(
        a, [slope](double x) { return x >= 0.0 ? x : slope * x; },
        [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

/// Natural log. Inputs must be strictly positive; callers clamp probabilities
/// first, so a violation here is an internal invariant failure.
inline Var log(Var a) {
    const auto& v = a.tape->value(a);
    for (double x : v)
        if (!(x > 0.0))
            throw std::logic_error("log: non-positive input " + std::to_string(x) +
                                   " (probability clamp missing?)");
    return detail::unary_elementwise(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

/// Pass-through gradient strictly inside (lo,hi), zero outside.
inline Var clamp(Var a, double lo, double hi) {
    return detail::unary_elementwise(
        a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

/// Softmax along an axis of a 2-d tensor (axis 0: down columns, 1: along rows).
inline Var softmax(Var a, int axis) {
    Tape& t = *a.tape;
    const auto& na = t.node(a);
    if (na.shape.size() != 2 || (axis != 0 && axis != 1))
        throw std::invalid_argument("softmax: need 2-d tensor and axis 0 or 1");
    const std::size_t r = na.shape[0], c = na.shape[1];
    const std::size_t slices = (axis == 0) ? c : r;
    const std::size_t len = (axis == 0) ? r : c;
    auto index = [axis, c](std::size_t slice, std::size_t i) {
        return axis == 0 ? i * c + slice : slice * c + i;
    };
    Tape::Node out;
    out.shape = na.shape;
    out.value.resize(na.value.size());
    for (std::size_t s = 0; s < slices; ++s) {
        double mx = na.value[index(s, 0)];
        for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, na.value[index(s, i)]);
        double z = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double e = std::exp(na.value[index(s, i)] - mx);
            out.value[index(s, i)] = e;
            z += e;
        }
        for (std::size_t i = 0; i < len; ++i) out.value[index(s, i)] /= z;
    }
    out.needs_grad = na.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t ia = a.id;
        out.backprop = [ia, slices, len, index](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            const auto& y = tp.node(self).value;
            auto& ga = tp.grad_of(ia);
            for (std::size_t s = 0; s < slices; ++s) {
                double dot = 0.0;
                for (std::size_t i = 0; i < len; ++i) dot += g[index(s, i)] * y[index(s, i)];
                for (std::size_t i = 0; i < len; ++i)
                    ga[index(s, i)] += y[index(s, i)] * (g[index(s, i)] - dot);
            }
        };
    }
    return t.push(std::move(out));
}

inline Var sum(Var a) {
    Tape& t = *a.tape;
    const auto& na = t.node(a);
    Tape::Node out;
    out.shape = {1, 1};
    out.value = {std::accumulate(na.value.begin(), na.value.end(), 0.0)};
    out.needs_grad = na.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t ia = a.id;
        out.backprop = [ia](Tape& tp, std::uint32_t self) {
            const double g = tp.grad_raw(self)[0];
            auto& ga = tp.grad_of(ia);
            for (double& v : ga) v += g;
        };
    }
    return t.push(std::move(out));
}

inline Var mean(Var a) {
    const std::size_t n = a.tape->value(a).size();
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

/// Stack parts vertically; all parts share a column count.
inline Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    Tape& t = *parts[0].tape;
    std::size_t c = t.node(parts[0]).shape[1];
    std::size_t total = 0;
    bool needs = false;
    for (Var p : parts) {
        detail::require_same_tape(parts[0], p);
        const auto& np = t.node(p);
        if (np.shape.size() != 2 || np.shape[1] != c)
            throw std::invalid_argument("concat_rows: column mismatch");
        total += np.shape[0];
        needs = needs || np.needs_grad;
    }
    Tape::Node out;
    out.shape = {total, c};
    out.value.reserve(total * c);
    for (Var p : parts) {
        const auto& v = t.node(p).value;
        out.value.insert(out.value.end(), v.begin(), v.end());
    }
    out.needs_grad = needs;
    if (needs) {
        std::vector<std::uint32_t> ids;
        for (Var p : parts) ids.push_back(p.id);
        out.backprop = [ids](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            std::size_t off = 0;
            for (std::uint32_t id : ids) {
                const std::size_t n = tp.node(id).value.size();
                if (tp.node(id).needs_grad) {
                    auto& gp = tp.grad_of(id);
                    for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
                }
                off += n;
            }
        };
    }
    return t.push(std::move(out));
}

inline Var concat_rows(std::initializer_list<Var> parts) {
    return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

/// Concatenate side by side; all parts share a row count.
inline Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    Tape& t = *parts[0].tape;
    const std::size_t r = t.node(parts[0]).shape[0];
    std::size_t total_c = 0;
    bool needs = false;
    for (Var p : parts) {
        detail::require_same_tape(parts[0], p);
        const auto& np = t.node(p);
        if (np.shape.size() != 2 || np.shape[0] != r)
            throw std::invalid_argument("concat_cols: row mismatch");
        total_c += np.shape[1];
        needs = needs || np.needs_grad;
    }
    Tape::Node out;
    out.shape = {r, total_c};
    out.value.assign(r * total_c, 0.0);
    std::size_t coff = 0;
    for (Var p : parts) {
        const auto& np = t.node(p);
        const std::size_t pc = np.shape[1];
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < pc; ++j)
                out.value[i * total_c + coff + j] = np.value[i * pc + j];
        coff += pc;
    }
    out.needs_grad = needs;
    if (needs) {
        std::vector<std::uint32_t> ids;
        std::vector<std::size_t> widths;
        for (Var p : parts) {
            ids.push_back(p.id);
            widths.push_back(t.node(p).shape[1]);
        }
        out.backprop = [ids, widths, r, total_c](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            std::size_t coff2 = 0;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                const std::size_t pc = widths[k];
                if (tp.node(ids[k]).needs_grad) {
                    auto& gp = tp.grad_of(ids[k]);
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < pc; ++j)
                            gp[i * pc + j] += g[i * total_c + coff2 + j];
                }
                coff2 += pc;
            }
        };
    }
    return t.push(std::move(out));
}

inline Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

/// One row of a matrix as [1 x c].
inline Var row(Var m, std::size_t r) {
    Tape& t = *m.tape;
    const auto& nm = t.node(m);
    if (nm.shape.size() != 2 || r >= nm.shape[0])
        throw std::invalid_argument("row: index out of range");
    const std::size_t c = nm.shape[1];
    Tape::Node out;
    out.shape = {1, c};
    out.value.assign(nm.value.begin() + r * c, nm.value.begin() + (r + 1) * c);
    out.needs_grad = nm.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t im = m.id;
        out.backprop = [im, r, c](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            auto& gm = tp.grad_of(im);
            for (std::size_t j = 0; j < c; ++j) gm[r * c + j] += g[j];
        };
    }
    return t.push(std::move(out));
}

/// Embedding lookup: selected table rows stacked as [k x width].
inline Var gather_rows(Var table, const std::vector<int>& ids) {
    Tape& t = *table.tape;
    const auto& nt = t.node(table);
    if (nt.shape.size() != 2) throw std::invalid_argument("gather_rows: need 2-d table");
    const std::size_t rows_n = nt.shape[0], c = nt.shape[1];
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= rows_n)
            throw std::out_of_range("gather_rows: id " + std::to_string(id) +
                                    " outside vocabulary of " + std::to_string(rows_n));
    Tape::Node out;
    out.shape = {ids.size(), c};
    out.value.reserve(ids.size() * c);
    for (int id : ids)
        out.value.insert(out.value.end(), nt.value.begin() + id * c,
                         nt.value.begin() + (id + 1) * c);
    out.needs_grad = nt.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t it = table.id;
        out.backprop = [it, ids, c](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            auto& gt = tp.grad_of(it);
            for (std::size_t k = 0; k < ids.size(); ++k)
                for (std::size_t j = 0; j < c; ++j) gt[ids[k] * c + j] += g[k * c + j];
        };
    }
    return t.push(std::move(out));
}

/// Standardize each column by the batch mean and population std:
/// (x - mu) / sqrt(var + eps). No learned affine terms.
inline Var batch_norm(Var x, double epsilon) {
    Tape& t = *x.tape;
    const auto& nx = t.node(x);
    if (nx.shape.size() != 2 || nx.shape[0] < 1)
        throw std::invalid_argument("batch_norm: need non-empty 2-d tensor");
    const std::size_t r = nx.shape[0], c = nx.shape[1];
    std::vector<double> inv_std(c);
    Tape::Node out;
    out.shape = nx.shape;
    out.value.resize(r * c);
    for (std::size_t j = 0; j < c; ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < r; ++i) mu += nx.value[i * c + j];
        mu /= static_cast<double>(r);
        double var = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            const double d = nx.value[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(r);
        inv_std[j] = 1.0 / std::sqrt(var + epsilon);
        for (std::size_t i = 0; i < r; ++i)
            out.value[i * c + j] = (nx.value[i * c + j] - mu) * inv_std[j];
    }
    out.needs_grad = nx.needs_grad;
    if (out.needs_grad) {
        const std::uint32_t ix = x.id;
        out.backprop = [ix, r, c, inv_std](Tape& tp, std::uint32_t self) {
            const auto& g = tp.grad_raw(self);
            const auto& y = tp.node(self).value;
            auto& gx = tp.grad_of(ix);
            const double rn = static_cast<double>(r);
            for (std::size_t j = 0; j < c; ++j) {
                double gsum = 0.0, gysum = 0.0;
                for (std::size_t i = 0; i < r; ++i) {
                    gsum += g[i * c + j];
                    gysum += g[i * c + j] * y[i * c + j];
                }
                const double gmean = gsum / rn, gymean = gysum / rn;
                for (std::size_t i = 0; i < r; ++i)
                    gx[i * c + j] += inv_std[j] * (g[i * c + j] - gmean - y[i * c + j] * gymean);
            }
        };
    }
    return t.push(std::move(out));
}

/// Stop-gradient: same values as a fresh constant leaf.
inline Var detach(Var a) {
    Tape& t = *a.tape;
    Tape::Node out;
    out.shape = t.node(a).shape;
    out.value = t.node(a).value;
    out.needs_grad = false;
    return t.push(std::move(out));
}

// ---------------------------------------------------------------------------
// Enum-dispatch activation, for config-driven choices.
// ---------------------------------------------------------------------------

enum class Activation { identity, tanh, sigmoid, leaky_relu, softmax, log };

inline Var activation(Activation kind, Var x, double slope = 0.01, int axis = 0) {
    switch (kind) {
        case Activation::identity: return scale(x, 1.0);
        case Activation::tanh: return tanh(x);
        case Activation::sigmoid: return sigmoid(x);
        case Activation::leaky_relu: return leaky_relu(x, slope);
        case Activation::softmax: return softmax(x, axis);
        case Activation::log: return log(x);
    }
    throw std::invalid_argument("activation: unknown kind");
}

}  // namespace amad
