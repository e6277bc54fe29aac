#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "pugan/geometry.hpp"
#include "pugan/mesh.hpp"

namespace pugan::nn {

/// Dense row-major matrix of doubles; every activation and parameter.
using Array2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_of(const Array2& a) {
    return "(" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ")";
}

struct NodeData;

using BackwardFn = std::function<void(NodeData&)>;

struct NodeData {
    Array2 value;
    Array2 grad;  // empty until something flows into it
    std::vector<std::shared_ptr<NodeData>> parents;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "leaf";

    void accumulate(const Array2& g) {
        if (!requires_grad) return;
        if (grad.size() == 0) grad = g;
        else grad += g;
    }

    /// Gradient or zeros of the value's shape.
    Array2 grad_or_zero() const {
        return grad.size() == 0 ? Array2::Zero(value.rows(), value.cols()) : grad;
    }
};

namespace detail {
inline thread_local int no_grad_depth = 0;
}

/// Disables graph recording on this thread while alive.
class NoGradGuard {
public:
    NoGradGuard() { ++detail::no_grad_depth; }
    ~NoGradGuard() { --detail::no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Handle to a node of the computation graph. Copies share the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<NodeData> node) : node_(std::move(node)) {}

    const Array2& value() const { return node_->value; }
    Array2& mutable_value() { return node_->value; }
    Array2 grad() const { return node_->grad_or_zero(); }
    bool has_grad() const { return node_->grad.size() != 0; }
    void zero_grad() { node_->grad.resize(0, 0); }
    bool requires_grad() const { return node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double item() const { return node_->value(0, 0); }
    NodeData& node() const { return *node_; }
    const std::shared_ptr<NodeData>& ptr() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<NodeData> node_;
};

inline Tensor constant(Array2 value) {
    auto n = std::make_shared<NodeData>();
    n->value = std::move(value);
    n->op = "constant";
    return Tensor(n);
}

/// Trainable leaf.
inline Tensor variable(Array2 value) {
    auto n = std::make_shared<NodeData>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->op = "variable";
    return Tensor(n);
}

namespace detail {

inline Tensor make_node(const char* op, Array2 value, std::vector<Tensor> parents, BackwardFn backward) {
    auto n = std::make_shared<NodeData>();
    n->value = std::move(value);
    n->op = op;
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (needs && no_grad_depth == 0) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.ptr());
        n->backward = std::move(backward);
    }
    return Tensor(n);
}

[[noreturn]] inline void shape_error(const char* op, const Array2& a, const Array2& b) {
    throw Error(std::string("shape mismatch in ") + op + ": " + shape_of(a) + " vs " + shape_of(b));
}

inline void require_same(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a.value(), b.value());
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same("add", a, b);
    return detail::make_node("add", a.value() + b.value(), {a, b}, [](NodeData& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(self.grad);
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same("sub", a, b);
    return detail::make_node("sub", a.value() - b.value(), {a, b}, [](NodeData& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(-self.grad);
    });
}

/// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same("mul", a, b);
    return detail::make_node("mul", a.value().cwiseProduct(b.value()), {a, b}, [](NodeData& self) {
        const Array2& av = self.parents[0]->value;
        const Array2& bv = self.parents[1]->value;
        self.parents[0]->accumulate(self.grad.cwiseProduct(bv));
        self.parents[1]->accumulate(self.grad.cwiseProduct(av));
    });
}

inline Tensor scale(const Tensor& a, double s) {
    return detail::make_node("scale", a.value() * s, {a},
                             [s](NodeData& self) { self.parents[0]->accumulate(self.grad * s); });
}

inline Tensor add_scalar(const Tensor& a, double s) {
    return detail::make_node("add_scalar", (a.value().array() + s).matrix(), {a},
                             [](NodeData& self) { self.parents[0]->accumulate(self.grad); });
}

inline Tensor square(const Tensor& a) {
    return detail::make_node("square", a.value().cwiseAbs2(), {a}, [](NodeData& self) {
        self.parents[0]->accumulate(2.0 * self.grad.cwiseProduct(self.parents[0]->value));
    });
}

inline Tensor relu(const Tensor& a) {
    return detail::make_node("relu", a.value().cwiseMax(0.0), {a}, [](NodeData& self) {
        const Array2& x = self.parents[0]->value;
        self.parents[0]->accumulate((x.array() > 0.0).select(self.grad.array(), 0.0).matrix());
    });
}

inline Tensor sigmoid(const Tensor& a) {
    Array2 y = a.value().unaryExpr([](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    return detail::make_node("sigmoid", std::move(y), {a}, [](NodeData& self) {
        const Array2& y = self.value;
        self.parents[0]->accumulate((self.grad.array() * y.array() * (1.0 - y.array())).matrix());
    });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) detail::shape_error("matmul", a.value(), b.value());
    return detail::make_node("matmul", a.value() * b.value(), {a, b}, [](NodeData& self) {
        const Array2& av = self.parents[0]->value;
        const Array2& bv = self.parents[1]->value;
        if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad * bv.transpose());
        if (self.parents[1]->requires_grad) self.parents[1]->accumulate(av.transpose() * self.grad);
    });
}

inline Tensor transpose(const Tensor& a) {
    return detail::make_node("transpose", a.value().transpose(), {a},
                             [](NodeData& self) { self.parents[0]->accumulate(self.grad.transpose()); });
}

/// Shared per-point affine map: x (N x in) * w (in x out) + b (1 x out).
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.cols() != w.rows()) detail::shape_error("linear", x.value(), w.value());
    if (b.rows() != 1 || b.cols() != w.cols()) detail::shape_error("linear bias", w.value(), b.value());
    Array2 y = x.value() * w.value();
    y.rowwise() += b.value().row(0);
    return detail::make_node("linear", std::move(y), {x, w, b}, [](NodeData& self) {
        NodeData& x = *self.parents[0];
        NodeData& w = *self.parents[1];
        NodeData& b = *self.parents[2];
        if (x.requires_grad) x.accumulate(self.grad * w.value.transpose());
        if (w.requires_grad) w.accumulate(x.value.transpose() * self.grad);
        if (b.requires_grad) b.accumulate(self.grad.colwise().sum());
    });
}

namespace detail {

inline Array2 softmax_rows_value(const Array2& x) {
    Array2 y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        y.row(r) = (x.row(r).array() - m).exp().matrix();
        y.row(r) /= y.row(r).sum();
    }
    return y;
}

inline Array2 softmax_rows_backward(const Array2& y, const Array2& g) {
    const Eigen::VectorXd dots = (g.cwiseProduct(y)).rowwise().sum();
    Array2 out = g;
    out.colwise() -= dots;
    return out.cwiseProduct(y);
}

}  // namespace detail

/// Softmax along each row (max-subtracted).
inline Tensor softmax_rows(const Tensor& a) {
    return detail::make_node("softmax_rows", detail::softmax_rows_value(a.value()), {a}, [](NodeData& self) {
        self.parents[0]->accumulate(detail::softmax_rows_backward(self.value, self.grad));
    });
}

/// Softmax along each column.
inline Tensor softmax_cols(const Tensor& a) {
    Array2 y = detail::softmax_rows_value(a.value().transpose()).transpose();
    return detail::make_node("softmax_cols", std::move(y), {a}, [](NodeData& self) {
        self.parents[0]->accumulate(
            detail::softmax_rows_backward(self.value.transpose(), self.grad.transpose()).transpose());
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw Error("concat_cols: no inputs");
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) detail::shape_error("concat_cols", parts.front().value(), p.value());
        cols += p.cols();
    }
    Array2 y(rows, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        y.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    return detail::make_node("concat_cols", std::move(y), parts, [](NodeData& self) {
        Eigen::Index o = 0;
        for (auto& p : self.parents) {
            const Eigen::Index c = p->value.cols();
            if (p->requires_grad) p->accumulate(self.grad.middleCols(o, c));
            o += c;
        }
    });
}

/// Row-major reinterpretation to rows x cols.
inline Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != a.value().size())
        throw Error("shape mismatch in reshape: " + shape_of(a.value()) + " to (" + std::to_string(rows) + "x" +
                    std::to_string(cols) + ")");
    Array2 y = Eigen::Map<const Array2>(a.value().data(), rows, cols);
    return detail::make_node("reshape", std::move(y), {a}, [](NodeData& self) {
        const NodeData& p = *self.parents[0];
        self.parents[0]->accumulate(Eigen::Map<const Array2>(self.grad.data(), p.value.rows(), p.value.cols()));
    });
}

/// Stacks `times` copies of the whole matrix vertically (copy i occupies
/// rows [i*R, (i+1)*R)).
inline Tensor tile_rows(const Tensor& a, Eigen::Index times) {
    if (times < 1) throw Error("tile_rows: times must be positive");
    const Eigen::Index r = a.rows();
    Array2 y(r * times, a.cols());
    for (Eigen::Index t = 0; t < times; ++t) y.middleRows(t * r, r) = a.value();
    return detail::make_node("tile_rows", std::move(y), {a}, [times](NodeData& self) {
        const Eigen::Index rr = self.parents[0]->value.rows();
        Array2 g = self.grad.middleRows(0, rr);
        for (Eigen::Index t = 1; t < times; ++t) g += self.grad.middleRows(t * rr, rr);
        self.parents[0]->accumulate(g);
    });
}

/// Rows picked by index (repeats allowed); gradient scatters back.
inline Tensor gather_rows(const Tensor& a, std::vector<std::size_t> indices) {
    Array2 y(static_cast<Eigen::Index>(indices.size()), a.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= static_cast<std::size_t>(a.rows()))
            throw Error("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                        shape_of(a.value()));
        y.row(static_cast<Eigen::Index>(i)) = a.value().row(static_cast<Eigen::Index>(indices[i]));
    }
    return detail::make_node("gather_rows", std::move(y), {a}, [idx = std::move(indices)](NodeData& self) {
        Array2 g = Array2::Zero(self.parents[0]->value.rows(), self.parents[0]->value.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            g.row(static_cast<Eigen::Index>(idx[i])) += self.grad.row(static_cast<Eigen::Index>(i));
        self.parents[0]->accumulate(g);
    });
}

/// Column-wise maximum over consecutive groups of `group` rows; the
/// gradient routes to the first maximal row of each group.
inline Tensor segment_max_rows(const Tensor& a, Eigen::Index group) {
    if (group < 1 || a.rows() % group != 0)
        throw Error("segment_max_rows: " + std::to_string(a.rows()) + " rows not divisible by " +
                    std::to_string(group));
    const Eigen::Index segments = a.rows() / group;
    const Eigen::Index cols = a.cols();
    Array2 y(segments, cols);
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(segments * cols));
    const Array2& x = a.value();
    for (Eigen::Index s = 0; s < segments; ++s) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            Eigen::Index best = s * group;
            for (Eigen::Index r = best + 1; r < (s + 1) * group; ++r)
                if (x(r, c) > x(best, c)) best = r;
            y(s, c) = x(best, c);
            arg[static_cast<std::size_t>(s * cols + c)] = best;
        }
    }
    return detail::make_node("segment_max_rows", std::move(y), {a}, [arg = std::move(arg)](NodeData& self) {
        const NodeData& p = *self.parents[0];
        Array2 g = Array2::Zero(p.value.rows(), p.value.cols());
        const Eigen::Index c = p.value.cols();
        for (Eigen::Index s = 0; s < self.grad.rows(); ++s)
            for (Eigen::Index j = 0; j < c; ++j) g(arg[static_cast<std::size_t>(s * c + j)], j) += self.grad(s, j);
        self.parents[0]->accumulate(g);
    });
}

/// Column-wise maximum over all rows (1 x C).
inline Tensor max_over_rows(const Tensor& a) { return segment_max_rows(a, a.rows()); }

inline Tensor sum_all(const Tensor& a) {
    Array2 y(1, 1);
    y(0, 0) = a.value().sum();
    return detail::make_node("sum_all", std::move(y), {a}, [](NodeData& self) {
        const NodeData& p = *self.parents[0];
        self.parents[0]->accumulate(Array2::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
    });
}

inline Tensor mean_all(const Tensor& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

/// Euclidean norm of each row (N x 1); zero rows get zero gradient.
inline Tensor row_norm(const Tensor& a) {
    Array2 y = a.value().rowwise().norm();
    return detail::make_node("row_norm", std::move(y), {a}, [](NodeData& self) {
        const Array2& x = self.parents[0]->value;
        Array2 g(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double n = self.value(r, 0);
            if (n > 0.0) g.row(r) = x.row(r) * (self.grad(r, 0) / n);
            else g.row(r).setZero();
        }
        self.parents[0]->accumulate(g);
    });
}

/// Populates gradients of every ancestor of the scalar `loss`.
inline void backward(const Tensor& loss) {
    if (loss.rows() != 1 || loss.cols() != 1)
        throw Error("backward: loss must be scalar, got " + shape_of(loss.value()));
    if (!loss.requires_grad()) return;
    std::vector<NodeData*> order;
    std::unordered_set<NodeData*> seen;
    std::vector<std::pair<NodeData*, std::size_t>> stack{{&loss.node(), 0}};
    seen.insert(&loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodeData* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node().accumulate(Array2::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeData& n = **it;
        if (n.backward && n.grad.size() != 0) n.backward(n);
    }
}

// ---------------------------------------------------------------------------
// Parameters and optimizer

/// Named trainable tensors with their Adam moments.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        Array2 m;
        Array2 v;
    };

    Tensor create(const std::string& name, Array2 init) {
        if (index_.count(name)) throw Error("parameter '" + name + "' already exists");
        index_[name] = entries_.size();
        Entry e{name, variable(std::move(init)), {}, {}};
        e.m = Array2::Zero(e.tensor.rows(), e.tensor.cols());
        e.v = e.m;
        entries_.push_back(std::move(e));
        return entries_.back().tensor;
    }

    Tensor get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
        return entries_[it->second].tensor;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::vector<Entry>& entries() noexcept { return entries_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    /// Scalar count of parameters whose name starts with `prefix`.
    std::size_t parameter_count(const std::string& prefix = "") const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.name.rfind(prefix, 0) == 0) n += static_cast<std::size_t>(e.tensor.value().size());
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) e.tensor.zero_grad();
    }

    std::int64_t step() const noexcept { return step_; }
    void set_step(std::int64_t s) noexcept { step_ = s; }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
    std::int64_t step_ = 0;
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One bias-corrected Adam update of every parameter; clears gradients.
inline void adam_step(ParamStore& params, const AdamOptions& opt) {
    params.set_step(params.step() + 1);
    const double t = static_cast<double>(params.step());
    const double c1 = 1.0 - std::pow(opt.beta1, t);
    const double c2 = 1.0 - std::pow(opt.beta2, t);
    for (auto& e : params.entries()) {
        Array2& w = e.tensor.mutable_value();
        if (e.tensor.has_grad()) {
            const Array2 g = e.tensor.grad();
            e.m = opt.beta1 * e.m + (1.0 - opt.beta1) * g;
            e.v = opt.beta2 * e.v + (1.0 - opt.beta2) * g.cwiseAbs2();
        } else {
            e.m *= opt.beta1;
            e.v *= opt.beta2;
        }
        w.array() -= opt.lr * (e.m.array() / c1) / ((e.v.array() / c2).sqrt() + opt.epsilon);
    }
    params.zero_grad();
}

/// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
inline Array2 glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Array2 w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
    return w;
}

/// Shared per-point fully connected layer.
struct Dense {
    Tensor weight;
    Tensor bias;

    Dense() = default;
    Dense(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
        : weight(store.create(name + "/w", glorot_uniform(in, out, rng))),
          bias(store.create(name + "/b", Array2::Zero(1, out))) {}

    Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
    Eigen::Index in() const { return weight.rows(); }
    Eigen::Index out() const { return weight.cols(); }
};

/// Stack of shared Dense layers with ReLU after each layer (optionally not
/// after the last).
class Mlp {
public:
    Mlp() = default;
    Mlp(ParamStore& store, const std::string& name, Eigen::Index in, const std::vector<Eigen::Index>& widths,
        Rng& rng, bool relu_last = true)
        : relu_last_(relu_last) {
        Eigen::Index prev = in;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            layers_.emplace_back(store, name + "/" + std::to_string(i), prev, widths[i], rng);
            prev = widths[i];
        }
    }

    Tensor operator()(Tensor x) const {
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            x = layers_[i](x);
            if (relu_last_ || i + 1 < layers_.size()) x = relu(x);
        }
        return x;
    }

    const std::vector<Dense>& layers() const noexcept { return layers_; }
    Eigen::Index out() const { return layers_.back().out(); }

private:
    std::vector<Dense> layers_;
    bool relu_last_ = true;
};

/// Residual self-attention over points. Queries G and keys H use C/4
/// channels, values K keep C. Attention W = softmax over each row of
/// G H^T (N x N, row-stochastic); output = input + W K.
class SelfAttention {
public:
    SelfAttention() = default;
    SelfAttention(ParamStore& store, const std::string& name, Eigen::Index channels, Rng& rng)
        : g_(store, name + "/g", channels, std::max<Eigen::Index>(1, channels / 4), rng),
          h_(store, name + "/h", channels, std::max<Eigen::Index>(1, channels / 4), rng),
          k_(store, name + "/k", channels, channels, rng) {}

    Tensor weights(const Tensor& x) const { return softmax_rows(matmul(relu(g_(x)), transpose(relu(h_(x))))); }

    Tensor operator()(const Tensor& x) const { return add(x, matmul(weights(x), relu(k_(x)))); }

    const Dense& value_layer() const noexcept { return k_; }

private:
    Dense g_, h_, k_;
};

// ---------------------------------------------------------------------------
// Checkpoints: "PUGAN-CKPT 1\n", "tensors <n>\n", then per tensor
// "<name> <rows> <cols>\n" followed by rows*cols little-endian float64.

inline constexpr const char* kCheckpointMagic = "PUGAN-CKPT 1";

inline void write_le_double(std::ostream& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

inline double read_le_double(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw Error("checkpoint: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
    out << kCheckpointMagic << '\n' << "tensors " << params.entries().size() << '\n';
    for (const auto& e : params.entries()) {
        const Array2& v = e.tensor.value();
        out << e.name << ' ' << v.rows() << ' ' << v.cols() << '\n';
        for (Eigen::Index i = 0; i < v.size(); ++i) write_le_double(out, v.data()[i]);
    }
    if (!out) throw Error("checkpoint write failed for '" + path.string() + "'");
}

/// Loads values into existing parameters; names and shapes must match.
inline void load_checkpoint(ParamStore& params, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (line != kCheckpointMagic) throw Error("checkpoint: bad magic in '" + path.string() + "'");
    std::getline(in, line);
    std::istringstream hs(line);
    std::string word;
    std::size_t count = 0;
    if (!(hs >> word >> count) || word != "tensors") throw Error("checkpoint: malformed header");
    if (count != params.entries().size())
        throw Error("checkpoint: holds " + std::to_string(count) + " tensors, model has " +
                    std::to_string(params.entries().size()));
    for (std::size_t t = 0; t < count; ++t) {
        std::getline(in, line);
        std::istringstream ls(line);
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        if (!(ls >> name >> rows >> cols)) throw Error("checkpoint: malformed tensor header");
        Tensor p = params.get(name);
        if (p.rows() != rows || p.cols() != cols)
            throw Error("checkpoint: shape mismatch for '" + name + "'");
        Array2& v = p.mutable_value();
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = read_le_double(in);
    }
}

}  // namespace pugan::nn
