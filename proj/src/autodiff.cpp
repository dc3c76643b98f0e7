#include "mimoe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mimoe/errors.hpp"
#include "mimoe/kernels.hpp"

namespace mimoe {
namespace {

constexpr double kLn2 = 0.69314718055994530942;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
}

Tensor transpose(const Tensor& a) {
    Tensor t(a.cols, a.rows);
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t c = 0; c < a.cols; ++c) t(c, r) = a(r, c);
    }
    return t;
}

// y[r] += x[r] * w, row by row; summation over the inner index is ascending.
void matmul_accumulate(const Tensor& x, const Tensor& w, Tensor& y) {
    const auto& k = kernels::active();
    for (std::size_t r = 0; r < x.rows; ++r) {
        double* yr = y.data.data() + r * y.cols;
        const double* xr = x.data.data() + r * x.cols;
        for (std::size_t i = 0; i < x.cols; ++i) k.axpy(xr[i], w.data.data() + i * w.cols, yr, y.cols);
    }
}

// d/dx and d/dw of y = x * w given dy.
void matmul_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw) {
    const auto& k = kernels::active();
    if (dx != nullptr) {
        const Tensor wt = transpose(w);
        for (std::size_t r = 0; r < dy.rows; ++r) {
            double* dxr = dx->data.data() + r * dx->cols;
            const double* dyr = dy.data.data() + r * dy.cols;
            for (std::size_t o = 0; o < dy.cols; ++o) k.axpy(dyr[o], wt.data.data() + o * wt.cols, dxr, dx->cols);
        }
    }
    if (dw != nullptr) {
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double* xr = x.data.data() + r * x.cols;
            const double* dyr = dy.data.data() + r * dy.cols;
            for (std::size_t i = 0; i < x.cols; ++i) k.axpy(xr[i], dyr, dw->data.data() + i * dw->cols, dw->cols);
        }
    }
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Softmax of one row restricted to kept entries; returns false if none kept.
bool softmax_row(const double* z, const std::uint8_t* keep, double* y, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
        if (keep[j]) {
            m = std::max(m, z[j]);
            any = true;
        }
    }
    if (!any) return false;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = keep[j] ? std::exp(z[j] - m) : 0.0;
        s += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (keep[j]) y[j] /= s;
    }
    return true;
}

}  // namespace

// --- ParamStore -------------------------------------------------------------

std::size_t ParamStore::add(const std::string& name, Tensor value) {
    if (find(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
    names_.push_back(name);
    grads_.emplace_back(value.rows, value.cols);
    values_.push_back(std::move(value));
    return values_.size() - 1;
}

std::size_t ParamStore::add_glorot(const std::string& name, std::size_t rows, std::size_t cols) {
    Tensor t(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& v : t.data) v = rng_.uniform(-limit, limit);
    return add(name, std::move(t));
}

std::size_t ParamStore::add_zeros(const std::string& name, std::size_t rows, std::size_t cols) {
    return add(name, Tensor(rows, cols));
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

std::size_t ParamStore::id(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw ArgumentError("no parameter named '" + name + "'");
}

void ParamStore::zero_grad() {
    for (auto& g : grads_) std::fill(g.data.begin(), g.data.end(), 0.0);
}

// --- Tape -------------------------------------------------------------------

Var Tape::push(Tensor value, std::function<void(Tape&, std::uint32_t)> backward) {
    if (differentiated_) throw Error("tape already differentiated; record a new tape");
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(backward)});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::param(ParamStore& params, std::size_t id) {
    ParamStore* store = &params;
    return push(params.value(id), [store, id](Tape& t, std::uint32_t self) {
        kernels::add(t.nodes_[self].grad.data, store->grad(id).data);
    });
}

Var Tape::matmul(Var x, Var w) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    if (xv.cols != wv.rows) {
        throw ShapeError("matmul: inner dimensions differ, " + xv.shape_string() + " vs " + wv.shape_string());
    }
    Tensor y(xv.rows, wv.cols);
    matmul_accumulate(xv, wv, y);
    return push(std::move(y), [x, w](Tape& t, std::uint32_t self) {
        auto& nx = t.nodes_[x.id];
        auto& nw = t.nodes_[w.id];
        matmul_backward(nx.value, nw.value, t.nodes_[self].grad, nx.grad.data.empty() ? nullptr : &nx.grad,
                        nw.grad.data.empty() ? nullptr : &nw.grad);
    });
}

Var Tape::linear(Var x, Var w, Var b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (xv.cols != wv.rows) {
        throw ShapeError("linear: inner dimensions differ, " + xv.shape_string() + " vs " + wv.shape_string());
    }
    if (bv.rows != 1 || bv.cols != wv.cols) {
        throw ShapeError("linear: bias " + bv.shape_string() + " does not match weight " + wv.shape_string());
    }
    Tensor y(xv.rows, wv.cols);
    for (std::size_t r = 0; r < y.rows; ++r) std::copy(bv.data.begin(), bv.data.end(), y.row(r).begin());
    matmul_accumulate(xv, wv, y);
    return push(std::move(y), [x, w, b](Tape& t, std::uint32_t self) {
        auto& nx = t.nodes_[x.id];
        auto& nw = t.nodes_[w.id];
        auto& nb = t.nodes_[b.id];
        const Tensor& dy = t.nodes_[self].grad;
        matmul_backward(nx.value, nw.value, dy, nx.grad.data.empty() ? nullptr : &nx.grad,
                        nw.grad.data.empty() ? nullptr : &nw.grad);
        if (!nb.grad.data.empty()) {
            for (std::size_t r = 0; r < dy.rows; ++r) kernels::add(dy.row(r), nb.grad.row(0));
        }
    });
}

Var Tape::add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Tensor y = value(a);
    kernels::add(value(b).data, y.data);
    return push(std::move(y), [a, b](Tape& t, std::uint32_t self) {
        const Tensor& dy = t.nodes_[self].grad;
        for (Var p : {a, b}) {
            auto& np = t.nodes_[p.id];
            if (!np.grad.data.empty()) kernels::add(dy.data, np.grad.data);
        }
    });
}

Var Tape::mul(Var a, Var b) {
    require_same_shape(value(a), value(b), "mul");
    Tensor y(value(a).rows, value(a).cols);
    kernels::mul(value(a).data, value(b).data, y.data);
    return push(std::move(y), [a, b](Tape& t, std::uint32_t self) {
        const Tensor& dy = t.nodes_[self].grad;
        auto& na = t.nodes_[a.id];
        auto& nb = t.nodes_[b.id];
        std::vector<double> tmp(dy.size());
        if (!na.grad.data.empty()) {
            kernels::mul(dy.data, nb.value.data, tmp);
            kernels::add(tmp, na.grad.data);
        }
        if (!nb.grad.data.empty()) {
            kernels::mul(dy.data, na.value.data, tmp);
            kernels::add(tmp, nb.grad.data);
        }
    });
}

Var Tape::scale(Var a, double s) {
    Tensor y = value(a);
    for (auto& v : y.data) v *= s;
    return push(std::move(y), [a, s](Tape& t, std::uint32_t self) {
        auto& na = t.nodes_[a.id];
        if (!na.grad.data.empty()) kernels::axpy(s, t.nodes_[self].grad.data, na.grad.data);
    });
}

Var Tape::tanh(Var a) {
    Tensor y = value(a);
    for (auto& v : y.data) v = std::tanh(v);
    return push(std::move(y), [a](Tape& t, std::uint32_t self) {
        auto& na = t.nodes_[a.id];
        if (na.grad.data.empty()) return;
        const auto& node = t.nodes_[self];
        for (std::size_t i = 0; i < node.value.size(); ++i) {
            const double yi = node.value.data[i];
            na.grad.data[i] += node.grad.data[i] * (1.0 - yi * yi);
        }
    });
}

Var Tape::shifted_softplus(Var a) {
    const Tensor& x = value(a);
    Tensor y(x.rows, x.cols);
    std::vector<double> slope(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y.data[i] = softplus(x.data[i]) - kLn2;
        slope[i] = sigmoid(x.data[i]);
    }
    return push(std::move(y), [a, slope = std::move(slope)](Tape& t, std::uint32_t self) {
        auto& na = t.nodes_[a.id];
        if (na.grad.data.empty()) return;
        const auto& dy = t.nodes_[self].grad.data;
        for (std::size_t i = 0; i < dy.size(); ++i) na.grad.data[i] += dy[i] * slope[i];
    });
}

Var Tape::gather_rows(Var a, std::vector<std::uint32_t> index) {
    const Tensor& x = value(a);
    Tensor y(index.size(), x.cols);
    for (std::size_t e = 0; e < index.size(); ++e) {
        if (index[e] >= x.rows) throw ShapeError("gather_rows: index out of range");
        std::copy(x.row(index[e]).begin(), x.row(index[e]).end(), y.row(e).begin());
    }
    return push(std::move(y), [a, index = std::move(index)](Tape& t, std::uint32_t self) {
        auto& na = t.nodes_[a.id];
        if (na.grad.data.empty()) return;
        const Tensor& dy = t.nodes_[self].grad;
        for (std::size_t e = 0; e < index.size(); ++e) kernels::add(dy.row(e), na.grad.row(index[e]));
    });
}

Var Tape::scatter_add_rows(Var a, std::vector<std::uint32_t> index, std::size_t rows) {
    const Tensor& x = value(a);
    if (index.size() != x.rows) throw ShapeError("scatter_add_rows: index length differs from row count");
    Tensor y(rows, x.cols);
    for (std::size_t e = 0; e < index.size(); ++e) {
        if (index[e] >= rows) throw ShapeError("scatter_add_rows: index out of range");
        kernels::add(x.row(e), y.row(index[e]));
    }
    return push(std::move(y), [a, index = std::move(index)](Tape& t, std::uint32_t self) {
        auto& na = t.nodes_[a.id];
        if (na.grad.data.empty()) return;
        const Tensor& dy = t.nodes_[self].grad;
        for (std::size_t e = 0; e < index.size(); ++e) kernels::add(dy.row(index[e]), na.grad.row(e));
    });
}

Var Tape::masked_softmax_rows(Var logits, std::vector<std::uint8_t> keep) {
    const Tensor& z = value(logits);
    if (keep.size() != z.size()) throw ShapeError("masked_softmax_rows: mask size differs from logits");
    Tensor y(z.rows, z.cols);
    for (std::size_t r = 0; r < z.rows; ++r) {
        if (!softmax_row(z.data.data() + r * z.cols, keep.data() + r * z.cols, y.data.data() + r * z.cols, z.cols)) {
            throw RoutingError("softmax: every entry of row " + std::to_string(r) + " is masked");
        }
    }
    return push(std::move(y), [logits, keep = std::move(keep)](Tape& t, std::uint32_t self) {
        auto& nz = t.nodes_[logits.id];
        if (nz.grad.data.empty()) return;
        const auto& node = t.nodes_[self];
        const std::size_t cols = node.value.cols;
        for (std::size_t r = 0; r < node.value.rows; ++r) {
            const double* y = node.value.data.data() + r * cols;
            const double* dy = node.grad.data.data() + r * cols;
            const std::uint8_t* kp = keep.data() + r * cols;
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                if (kp[j]) dot += y[j] * dy[j];
            }
            for (std::size_t j = 0; j < cols; ++j) {
                if (kp[j]) nz.grad.data[r * cols + j] += y[j] * (dy[j] - dot);
            }
        }
    });
}

Var Tape::column_sums(Var a) {
    const Tensor& x = value(a);
    Tensor y(1, x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) kernels::add(x.row(r), y.row(0));
    return push(std::move(y), [a](Tape& t, std::uint32_t self) {
        auto& na = t.nodes_[a.id];
        if (na.grad.data.empty()) return;
        const Tensor& dy = t.nodes_[self].grad;
        for (std::size_t r = 0; r < na.grad.rows; ++r) kernels::add(dy.row(0), na.grad.row(r));
    });
}

Var Tape::dispersion_ratio(Var s, double eps) {
    const Tensor& x = value(s);
    if (x.rows != 1 || x.cols == 0) throw ShapeError("dispersion_ratio: expected a 1 x K row, got " + x.shape_string());
    const std::size_t k = x.cols;
    const double kd = static_cast<double>(k);
    double mean = 0.0;
    for (double v : x.data) mean += v;
    mean /= kd;
    double q = 0.0;
    double dev_sum = 0.0;
    for (double v : x.data) {
        q += (v - mean) * (v - mean);
        dev_sum += v - mean;
    }
    const double denom = mean * mean + eps;
    Tensor y(1, 1, q / denom / kd);
    return push(std::move(y), [s, mean, q, dev_sum, denom, kd](Tape& t, std::uint32_t self) {
        auto& ns = t.nodes_[s.id];
        if (ns.grad.data.empty()) return;
        const double g = t.nodes_[self].grad.data[0];
        const double ddenom = 2.0 * mean / kd;
        for (std::size_t i = 0; i < ns.value.cols; ++i) {
            const double dq = 2.0 * (ns.value.data[i] - mean) - 2.0 * dev_sum / kd;
            ns.grad.data[i] += g * (dq / denom - q * ddenom / (denom * denom)) / kd;
        }
    });
}

Var Tape::masked_mse(Var pred, const Tensor& target, const Tensor& mask) {
    const Tensor& p = value(pred);
    require_same_shape(p, target, "masked_mse");
    require_same_shape(p, mask, "masked_mse");
    double count = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (mask.data[i] != 0.0) {
            const double d = p.data[i] - target.data[i];
            acc += d * d;
            count += 1.0;
        }
    }
    if (count == 0.0) throw LossError("task loss: every target in the batch is masked");
    Tensor y(1, 1, acc / count);
    return push(std::move(y), [pred, target, mask, count](Tape& t, std::uint32_t self) {
        auto& np = t.nodes_[pred.id];
        if (np.grad.data.empty()) return;
        const double g = t.nodes_[self].grad.data[0];
        for (std::size_t i = 0; i < np.value.size(); ++i) {
            if (mask.data[i] != 0.0) np.grad.data[i] += g * 2.0 * (np.value.data[i] - target.data[i]) / count;
        }
    });
}

Var Tape::masked_bce_logits(Var logits, const Tensor& target, const Tensor& mask) {
    const Tensor& z = value(logits);
    require_same_shape(z, target, "masked_bce_logits");
    require_same_shape(z, mask, "masked_bce_logits");
    double count = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (mask.data[i] != 0.0) {
            const double x = z.data[i];
            acc += std::max(x, 0.0) - x * target.data[i] + std::log1p(std::exp(-std::abs(x)));
            count += 1.0;
        }
    }
    if (count == 0.0) throw LossError("task loss: every label in the batch is masked");
    Tensor y(1, 1, acc / count);
    return push(std::move(y), [logits, target, mask, count](Tape& t, std::uint32_t self) {
        auto& nz = t.nodes_[logits.id];
        if (nz.grad.data.empty()) return;
        const double g = t.nodes_[self].grad.data[0];
        for (std::size_t i = 0; i < nz.value.size(); ++i) {
            if (mask.data[i] != 0.0) nz.grad.data[i] += g * (sigmoid(nz.value.data[i]) - target.data[i]) / count;
        }
    });
}

Var Tape::mixture(Var alpha, std::span<const Var> experts, std::vector<std::vector<std::int32_t>> rows) {
    const Tensor& a = value(alpha);
    if (experts.size() != a.cols || rows.size() != a.cols) {
        throw ShapeError("mixture: expected " + std::to_string(a.cols) + " experts");
    }
    std::size_t width = 0;
    bool have_width = false;
    for (std::size_t k = 0; k < experts.size(); ++k) {
        if (rows[k].size() != a.rows) throw ShapeError("mixture: row map length differs from batch size");
        const Tensor& h = value(experts[k]);
        const bool used = std::any_of(rows[k].begin(), rows[k].end(), [](std::int32_t r) { return r >= 0; });
        if (!used) continue;
        if (have_width && h.cols != width) {
            throw ShapeError("mixture: embedding width " + std::to_string(h.cols) + " differs from " +
                             std::to_string(width));
        }
        width = h.cols;
        have_width = true;
    }
    Tensor y(a.rows, width);
    for (std::size_t b = 0; b < a.rows; ++b) {
        for (std::size_t k = 0; k < experts.size(); ++k) {
            const std::int32_t r = rows[k][b];
            if (r < 0) continue;
            kernels::axpy(a(b, k), value(experts[k]).row(static_cast<std::size_t>(r)), y.row(b));
        }
    }
    std::vector<Var> ex(experts.begin(), experts.end());
    return push(std::move(y), [alpha, ex = std::move(ex), rows = std::move(rows)](Tape& t, std::uint32_t self) {
        const Tensor& dy = t.nodes_[self].grad;
        auto& na = t.nodes_[alpha.id];
        for (std::size_t b = 0; b < dy.rows; ++b) {
            for (std::size_t k = 0; k < ex.size(); ++k) {
                const std::int32_t r = rows[k][b];
                if (r < 0) continue;
                auto& nh = t.nodes_[ex[k].id];
                const auto hrow = nh.value.row(static_cast<std::size_t>(r));
                if (!na.grad.data.empty()) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < dy.cols; ++c) dot += dy(b, c) * hrow[c];
                    na.grad(b, k) += dot;
                }
                if (!nh.grad.data.empty()) {
                    kernels::axpy(na.value(b, k), dy.row(b), nh.grad.row(static_cast<std::size_t>(r)));
                }
            }
        }
    });
}

Var Tape::weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
    if (terms.size() != weights.size()) throw ShapeError("weighted_sum: terms and weights differ in length");
    double acc = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const Tensor& v = value(terms[i]);
        if (v.rows != 1 || v.cols != 1) throw ShapeError("weighted_sum: terms must be 1 x 1");
        acc += weights[i] * v.data[0];
    }
    std::vector<Var> ts(terms.begin(), terms.end());
    std::vector<double> ws(weights.begin(), weights.end());
    return push(Tensor(1, 1, acc), [ts = std::move(ts), ws = std::move(ws)](Tape& t, std::uint32_t self) {
        const double g = t.nodes_[self].grad.data[0];
        for (std::size_t i = 0; i < ts.size(); ++i) {
            auto& n = t.nodes_[ts[i].id];
            if (!n.grad.data.empty()) n.grad.data[0] += g * ws[i];
        }
    });
}

void Tape::backward(Var loss) {
    if (differentiated_) throw Error("backward called twice on the same tape");
    const Tensor& lv = value(loss);
    if (lv.rows != 1 || lv.cols != 1) throw ShapeError("backward: loss must be 1 x 1, got " + lv.shape_string());
    differentiated_ = true;

    // A node needs a gradient buffer iff it is a parameter or an op; plain
    // constants never receive gradients.
    for (std::size_t i = 0; i <= loss.id; ++i) {
        auto& n = nodes_[i];
        if (n.backward) n.grad = Tensor(n.value.rows, n.value.cols);
    }
    nodes_[loss.id].grad.data[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
    }
}

std::vector<double> softmax(std::span<const double> z) {
    std::vector<std::uint8_t> keep(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) keep[j] = std::isinf(z[j]) && z[j] < 0 ? 0 : 1;
    std::vector<double> y(z.size());
    if (!softmax_row(z.data(), keep.data(), y.data(), z.size())) {
        throw RoutingError("softmax: every entry is -inf");
    }
    return y;
}

GradCheckReport grad_check(const std::function<Var(Tape&)>& loss_fn, ParamStore& params, double h) {
    auto evaluate = [&]() {
        Tape tape;
        const Var loss = loss_fn(tape);
        const double v = tape.value(loss).data.at(0);
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
        return v;
    };

    params.zero_grad();
    {
        Tape tape;
        const Var loss = loss_fn(tape);
        if (!std::isfinite(tape.value(loss).data.at(0))) throw NumericError("grad_check: non-finite loss");
        tape.backward(loss);
    }

    GradCheckReport report;
    for (std::size_t p = 0; p < params.count(); ++p) {
        auto& values = params.value(p).data;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            auto at = [&](double offset) {
                values[i] = original + offset;
                return evaluate();
            };
            const double f1 = at(h), b1 = at(-h), f2 = at(2.0 * h), b2 = at(-2.0 * h);
            values[i] = original;

            const double fd = (8.0 * (f1 - b1) - (f2 - b2)) / (12.0 * h);
            const double ad = params.grad(p).data[i];
            const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-8});
            ++report.coordinates;
            if (rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_parameter = params.name(p);
                report.worst_index = i;
                report.worst_analytic = ad;
                report.worst_numeric = fd;
            }
        }
    }
    return report;
}

}  // namespace mimoe
