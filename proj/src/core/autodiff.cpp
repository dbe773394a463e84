#include "lgsrr/core/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "lgsrr/core/ops.hpp"

namespace lgsrr::ad {

namespace {

void require_same_tape(Var a, Var b) {
    if (&a.tape() != &b.tape()) {
        throw std::logic_error("autodiff op mixes nodes from different tapes");
    }
}

void require_same_size(Var a, Var b, const char* what) {
    require_same_tape(a, b);
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
}

std::vector<double> copy_of(std::span<const double> s) { return {s.begin(), s.end()}; }

Var vector_node(Tape& t, std::vector<double> value, std::initializer_list<Var> parents,
                Tape::Backward backward) {
    const std::size_t n = value.size();
    return t.record(std::move(value), n, 1, parents, std::move(backward));
}

Var scalar_node(Tape& t, double value, std::initializer_list<Var> parents, Tape::Backward backward) {
    return t.record({value}, 1, 1, parents, std::move(backward));
}

} // namespace

Var linear(Var x, Var w, Var b) {
    require_same_tape(x, w);
    require_same_tape(x, b);
    Tape& t = x.tape();
    const std::size_t rows = w.rows();
    const std::size_t cols = w.cols();
    if (cols != x.size()) {
        throw std::invalid_argument("linear: weight " + describe_dim(rows, cols) +
                                    " cannot multiply input of dim " + std::to_string(x.size()));
    }
    if (b.size() != rows) {
        throw std::invalid_argument("linear: bias dim " + std::to_string(b.size()) +
                                    " does not match weight rows " + std::to_string(rows));
    }
    const auto xv = x.value();
    const auto wv = w.value();
    const auto bv = b.value();
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = bv[i];
        const double* wr = wv.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            acc += wr[j] * xv[j];
        }
        out[i] = acc;
    }
    return vector_node(t, std::move(out), {x, w, b}, [x, w, b, rows, cols](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto xv = tp.value(x.id());
        const auto wv = tp.value(w.id());
        if (tp.requires_grad(x.id())) {
            auto gx = tp.accum(x.id());
            for (std::size_t i = 0; i < rows; ++i) {
                const double* wr = wv.data() + i * cols;
                for (std::size_t j = 0; j < cols; ++j) {
                    gx[j] += g[i] * wr[j];
                }
            }
        }
        if (tp.requires_grad(w.id())) {
            auto gw = tp.accum(w.id());
            for (std::size_t i = 0; i < rows; ++i) {
                double* gr = gw.data() + i * cols;
                for (std::size_t j = 0; j < cols; ++j) {
                    gr[j] += g[i] * xv[j];
                }
            }
        }
        if (tp.requires_grad(b.id())) {
            auto gb = tp.accum(b.id());
            for (std::size_t i = 0; i < rows; ++i) {
                gb[i] += g[i];
            }
        }
    });
}

Var relu(Var x) {
    Tape& t = x.tape();
    std::vector<double> out = copy_of(x.value());
    for (double& v : out) {
        v = v > 0.0 ? v : 0.0;
    }
    return vector_node(t, std::move(out), {x}, [x](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto xv = tp.value(x.id());
        auto gx = tp.accum(x.id());
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0) {
                gx[i] += g[i];
            }
        }
    });
}

Var softmax(Var x) {
    Tape& t = x.tape();
    const Vec y = lgsrr::softmax(x.value_vec());
    return vector_node(t, y.values(), {x}, [x](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto y = tp.value(self);
        double inner = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            inner += g[i] * y[i];
        }
        auto gx = tp.accum(x.id());
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += y[i] * (g[i] - inner);
        }
    });
}

Var log_softmax(Var x) {
    Tape& t = x.tape();
    const double lse = log_sum_exp(x.value());
    std::vector<double> out = copy_of(x.value());
    for (double& v : out) {
        v -= lse;
    }
    return vector_node(t, std::move(out), {x}, [x](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto y = tp.value(self);
        double total = 0.0;
        for (double gi : g) {
            total += gi;
        }
        auto gx = tp.accum(x.id());
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i] - std::exp(y[i]) * total;
        }
    });
}

Var exp(Var x) {
    Tape& t = x.tape();
    std::vector<double> out = copy_of(x.value());
    for (double& v : out) {
        v = std::exp(v);
    }
    return t.record(std::move(out), x.rows(), x.cols(), {x}, [x](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto y = tp.value(self);
        auto gx = tp.accum(x.id());
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i] * y[i];
        }
    });
}

Var mean_pool(std::span<const Var> tokens) {
    if (tokens.empty()) {
        throw std::invalid_argument("mean_pool: empty token list");
    }
    Tape& t = tokens.front().tape();
    const std::size_t dim = tokens.front().size();
    std::vector<double> out(dim, 0.0);
    for (const Var& tok : tokens) {
        require_same_size(tokens.front(), tok, "mean_pool");
        const auto v = tok.value();
        for (std::size_t i = 0; i < dim; ++i) {
            out[i] += v[i];
        }
    }
    const double n = static_cast<double>(tokens.size());
    for (double& v : out) {
        v /= n;
    }
    std::vector<Var> parents(tokens.begin(), tokens.end());
    return t.record(std::move(out), dim, 1, std::span<const Var>(parents),
                    [parents, n](Tape& tp, std::uint32_t self) {
                        const auto g = tp.grad(self);
                        for (const Var& p : parents) {
                            if (!tp.requires_grad(p.id())) {
                                continue;
                            }
                            auto gp = tp.accum(p.id());
                            for (std::size_t i = 0; i < g.size(); ++i) {
                                gp[i] += g[i] / n;
                            }
                        }
                    });
}

Var add(Var a, Var b) {
    require_same_size(a, b, "add");
    std::vector<double> out = copy_of(a.value());
    const auto bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += bv[i];
    }
    return a.tape().record(std::move(out), a.rows(), a.cols(), {a, b}, [a, b](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        for (Var p : {a, b}) {
            if (tp.requires_grad(p.id())) {
                auto gp = tp.accum(p.id());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gp[i] += g[i];
                }
            }
        }
    });
}

Var sub(Var a, Var b) {
    require_same_size(a, b, "sub");
    std::vector<double> out = copy_of(a.value());
    const auto bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= bv[i];
    }
    return a.tape().record(std::move(out), a.rows(), a.cols(), {a, b}, [a, b](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        if (tp.requires_grad(a.id())) {
            auto ga = tp.accum(a.id());
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
            }
        }
        if (tp.requires_grad(b.id())) {
            auto gb = tp.accum(b.id());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] -= g[i];
            }
        }
    });
}

Var mul(Var a, Var b) {
    require_same_size(a, b, "mul");
    std::vector<double> out = copy_of(a.value());
    const auto bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= bv[i];
    }
    return a.tape().record(std::move(out), a.rows(), a.cols(), {a, b}, [a, b](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto av = tp.value(a.id());
        const auto bv = tp.value(b.id());
        if (tp.requires_grad(a.id())) {
            auto ga = tp.accum(a.id());
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * bv[i];
            }
        }
        if (tp.requires_grad(b.id())) {
            auto gb = tp.accum(b.id());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] += g[i] * av[i];
            }
        }
    });
}

Var scale(Var v, Var s) {
    require_same_tape(v, s);
    if (s.size() != 1) {
        throw std::invalid_argument("scale: factor must be a scalar node, got size " +
                                    std::to_string(s.size()));
    }
    const double factor = s.scalar();
    std::vector<double> out = copy_of(v.value());
    for (double& x : out) {
        x *= factor;
    }
    return v.tape().record(std::move(out), v.rows(), v.cols(), {v, s}, [v, s](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto vv = tp.value(v.id());
        const double factor = tp.value(s.id())[0];
        if (tp.requires_grad(v.id())) {
            auto gv = tp.accum(v.id());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gv[i] += g[i] * factor;
            }
        }
        if (tp.requires_grad(s.id())) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                acc += g[i] * vv[i];
            }
            tp.accum(s.id())[0] += acc;
        }
    });
}

Var scale(Var v, double s) {
    std::vector<double> out = copy_of(v.value());
    for (double& x : out) {
        x *= s;
    }
    return v.tape().record(std::move(out), v.rows(), v.cols(), {v}, [v, s](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        auto gv = tp.accum(v.id());
        for (std::size_t i = 0; i < g.size(); ++i) {
            gv[i] += g[i] * s;
        }
    });
}

Var concat(std::span<const Var> parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat: no inputs");
    }
    Tape& t = parts.front().tape();
    std::vector<double> out;
    std::vector<std::size_t> offsets;
    for (const Var& p : parts) {
        require_same_tape(parts.front(), p);
        offsets.push_back(out.size());
        const auto v = p.value();
        out.insert(out.end(), v.begin(), v.end());
    }
    std::vector<Var> parents(parts.begin(), parts.end());
    const std::size_t n = out.size();
    return t.record(std::move(out), n, 1, std::span<const Var>(parents),
                    [parents, offsets](Tape& tp, std::uint32_t self) {
                        const auto g = tp.grad(self);
                        for (std::size_t k = 0; k < parents.size(); ++k) {
                            const Var p = parents[k];
                            if (!tp.requires_grad(p.id())) {
                                continue;
                            }
                            auto gp = tp.accum(p.id());
                            for (std::size_t i = 0; i < gp.size(); ++i) {
                                gp[i] += g[offsets[k] + i];
                            }
                        }
                    });
}

Var concat(Var a, Var b) {
    const Var parts[] = {a, b};
    return concat(std::span<const Var>(parts));
}

Var zero_pad(Var v, std::size_t before, std::size_t after) {
    std::vector<double> out(before, 0.0);
    const auto vv = v.value();
    out.insert(out.end(), vv.begin(), vv.end());
    out.resize(out.size() + after, 0.0);
    return vector_node(v.tape(), std::move(out), {v}, [v, before](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        auto gv = tp.accum(v.id());
        for (std::size_t i = 0; i < gv.size(); ++i) {
            gv[i] += g[before + i];
        }
    });
}

Var stack(std::span<const Var> scalars) {
    if (scalars.empty()) {
        throw std::invalid_argument("stack: no inputs");
    }
    std::vector<double> out;
    out.reserve(scalars.size());
    for (const Var& s : scalars) {
        require_same_tape(scalars.front(), s);
        out.push_back(s.scalar());
    }
    std::vector<Var> parents(scalars.begin(), scalars.end());
    const std::size_t n = out.size();
    return scalars.front().tape().record(std::move(out), n, 1, std::span<const Var>(parents),
                                         [parents](Tape& tp, std::uint32_t self) {
                                             const auto g = tp.grad(self);
                                             for (std::size_t k = 0; k < parents.size(); ++k) {
                                                 if (tp.requires_grad(parents[k].id())) {
                                                     tp.accum(parents[k].id())[0] += g[k];
                                                 }
                                             }
                                         });
}

Var element(Var v, std::size_t i) {
    if (i >= v.size()) {
        throw std::out_of_range("element: index " + std::to_string(i) + " out of range for size " +
                                std::to_string(v.size()));
    }
    return scalar_node(v.tape(), v.value()[i], {v}, [v, i](Tape& tp, std::uint32_t self) {
        tp.accum(v.id())[i] += tp.grad(self)[0];
    });
}

Var sum(Var x) {
    double acc = 0.0;
    for (double v : x.value()) {
        acc += v;
    }
    return scalar_node(x.tape(), acc, {x}, [x](Tape& tp, std::uint32_t self) {
        const double g = tp.grad(self)[0];
        for (double& gi : tp.accum(x.id())) {
            gi += g;
        }
    });
}

Var dot(Var a, Var b) {
    require_same_size(a, b, "dot");
    const auto av = a.value();
    const auto bv = b.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        acc += av[i] * bv[i];
    }
    return scalar_node(a.tape(), acc, {a, b}, [a, b](Tape& tp, std::uint32_t self) {
        const double g = tp.grad(self)[0];
        const auto av = tp.value(a.id());
        const auto bv = tp.value(b.id());
        if (tp.requires_grad(a.id())) {
            auto ga = tp.accum(a.id());
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += g * bv[i];
            }
        }
        if (tp.requires_grad(b.id())) {
            auto gb = tp.accum(b.id());
            for (std::size_t i = 0; i < gb.size(); ++i) {
                gb[i] += g * av[i];
            }
        }
    });
}

Var weighted_sum(Var x, std::span<const double> weights) {
    if (weights.size() != x.size()) {
        throw std::invalid_argument("weighted_sum: dimension mismatch " + std::to_string(x.size()) +
                                    " vs " + std::to_string(weights.size()));
    }
    const auto xv = x.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        acc += xv[i] * weights[i];
    }
    std::vector<double> w(weights.begin(), weights.end());
    return scalar_node(x.tape(), acc, {x}, [x, w = std::move(w)](Tape& tp, std::uint32_t self) {
        const double g = tp.grad(self)[0];
        auto gx = tp.accum(x.id());
        for (std::size_t i = 0; i < gx.size(); ++i) {
            gx[i] += g * w[i];
        }
    });
}

Var cosine(Var a, Var b, bool* degenerate) {
    require_same_size(a, b, "cosine");
    const auto av = a.value();
    const auto bv = b.value();
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        ab += av[i] * bv[i];
        aa += av[i] * av[i];
        bb += bv[i] * bv[i];
    }
    if (aa == 0.0 || bb == 0.0) {
        if (degenerate != nullptr) {
            *degenerate = true;
        }
        return a.tape().constant(0.0);
    }
    if (degenerate != nullptr) {
        *degenerate = false;
    }
    const double na = std::sqrt(aa);
    const double nb = std::sqrt(bb);
    const double raw = ab / (na * nb);
    const double c = std::clamp(raw, -1.0, 1.0);
    const bool clamped = raw != c;
    return scalar_node(a.tape(), c, {a, b}, [a, b, na, nb, c, clamped](Tape& tp, std::uint32_t self) {
        if (clamped) {
            return;
        }
        const double g = tp.grad(self)[0];
        const auto av = tp.value(a.id());
        const auto bv = tp.value(b.id());
        const double inv = 1.0 / (na * nb);
        if (tp.requires_grad(a.id())) {
            auto ga = tp.accum(a.id());
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += g * (bv[i] * inv - c * av[i] / (na * na));
            }
        }
        if (tp.requires_grad(b.id())) {
            auto gb = tp.accum(b.id());
            for (std::size_t i = 0; i < gb.size(); ++i) {
                gb[i] += g * (av[i] * inv - c * bv[i] / (nb * nb));
            }
        }
    });
}

Var mse(Var a, Var b) {
    require_same_size(a, b, "mse");
    if (a.size() == 0) {
        throw std::invalid_argument("mse: empty input");
    }
    const auto av = a.value();
    const auto bv = b.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        acc += d * d;
    }
    const double n = static_cast<double>(av.size());
    return scalar_node(a.tape(), acc / n, {a, b}, [a, b, n](Tape& tp, std::uint32_t self) {
        const double g = tp.grad(self)[0];
        const auto av = tp.value(a.id());
        const auto bv = tp.value(b.id());
        const bool want_a = tp.requires_grad(a.id());
        const bool want_b = tp.requires_grad(b.id());
        std::span<double> ga;
        std::span<double> gb;
        if (want_a) {
            ga = tp.accum(a.id());
        }
        if (want_b) {
            gb = tp.accum(b.id());
        }
        for (std::size_t i = 0; i < av.size(); ++i) {
            const double d = 2.0 * g * (av[i] - bv[i]) / n;
            if (want_a) {
                ga[i] += d;
            }
            if (want_b) {
                gb[i] -= d;
            }
        }
    });
}

Var cross_entropy(Var logits, std::size_t label) {
    const Vec z = logits.value_vec();
    const double value = lgsrr::cross_entropy(z, label);
    return scalar_node(logits.tape(), value, {logits}, [logits, label](Tape& tp, std::uint32_t self) {
        const double g = tp.grad(self)[0];
        const auto zv = tp.value(logits.id());
        const Vec p = lgsrr::softmax(Vec(copy_of(zv)));
        auto gz = tp.accum(logits.id());
        for (std::size_t i = 0; i < gz.size(); ++i) {
            gz[i] += g * (p[i] - (i == label ? 1.0 : 0.0));
        }
    });
}

Var exp2_minus_one(Var x) {
    std::vector<double> out = copy_of(x.value());
    for (double& v : out) {
        v = std::exp2(v) - 1.0;
    }
    return x.tape().record(std::move(out), x.rows(), x.cols(), {x}, [x](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto y = tp.value(self);
        auto gx = tp.accum(x.id());
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i] * std::numbers::ln2 * (y[i] + 1.0);
        }
    });
}

Var matvec_const(Var m, std::span<const double> v) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    if (v.size() != cols) {
        throw std::invalid_argument("matvec: matrix " + describe_dim(rows, cols) +
                                    " cannot multiply vector of dim " + std::to_string(v.size()));
    }
    const auto mv = m.value();
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out[r] += mv[r * cols + c] * v[c];
        }
    }
    std::vector<double> vc(v.begin(), v.end());
    return vector_node(m.tape(), std::move(out), {m}, [m, vc = std::move(vc), rows, cols](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        auto gm = tp.accum(m.id());
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                gm[r * cols + c] += g[r] * vc[c];
            }
        }
    });
}

namespace {

// Log-space normalisation along rows (stride 1 within a line) or columns.
Var normalize_lines_log(Var m, bool by_rows) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    const std::size_t lines = by_rows ? rows : cols;
    const std::size_t len = by_rows ? cols : rows;
    const auto at = [=](std::size_t line, std::size_t k) {
        return by_rows ? line * cols + k : k * cols + line;
    };
    const auto mv = m.value();
    std::vector<double> out(mv.begin(), mv.end());
    std::vector<double> buf(len);
    for (std::size_t l = 0; l < lines; ++l) {
        for (std::size_t k = 0; k < len; ++k) {
            buf[k] = mv[at(l, k)];
        }
        const double lse = log_sum_exp(buf);
        for (std::size_t k = 0; k < len; ++k) {
            out[at(l, k)] -= lse;
        }
    }
    return m.tape().record(std::move(out), rows, cols, {m}, [m, lines, len, at](Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto y = tp.value(self);
        auto gm = tp.accum(m.id());
        for (std::size_t l = 0; l < lines; ++l) {
            double total = 0.0;
            for (std::size_t k = 0; k < len; ++k) {
                total += g[at(l, k)];
            }
            for (std::size_t k = 0; k < len; ++k) {
                const std::size_t idx = at(l, k);
                gm[idx] += g[idx] - std::exp(y[idx]) * total;
            }
        }
    });
}

} // namespace

Var normalize_rows_log(Var m) { return normalize_lines_log(m, true); }
Var normalize_cols_log(Var m) { return normalize_lines_log(m, false); }

} // namespace lgsrr::ad
