#include "fallacy/nn.hpp"

#include <cmath>
#include <unordered_set>

#include "fallacy/errors.hpp"
#include "fallacy/text.hpp"

namespace fallacy::nn {

void Node::accumulate(const Matrix& g) {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    grad += g;
}

namespace {

Var make(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& v : inputs) {
        n->requires_grad = n->requires_grad || v.requires_grad();
        n->parents.push_back(v.node());
    }
    if (n->requires_grad) n->backward = std::move(bw);
    return Var(std::move(n));
}

inline Node& P(Node& self, std::size_t i) { return *self.parents[i]; }

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}

}  // namespace

Var constant(Matrix m) {
    auto n = std::make_shared<Node>();
    n->value = std::move(m);
    return Var(std::move(n));
}

Var parameter(Matrix m) {
    auto n = std::make_shared<Node>();
    n->value = std::move(m);
    n->requires_grad = true;
    return Var(std::move(n));
}

void backward(const Var& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeMismatch("backward() needs a 1x1 loss");
    if (!loss.requires_grad()) return;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->accumulate(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->grad.size() != 0) n->backward(*n);
    }
}

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows())
        throw ShapeMismatch("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    return make(a.value() * b.value(), {a, b}, [](Node& s) {
        Node& a = P(s, 0);
        Node& b = P(s, 1);
        if (a.requires_grad) a.accumulate(s.grad * b.value.transpose());
        if (b.requires_grad) b.accumulate(a.value.transpose() * s.grad);
    });
}

Var transpose(const Var& a) {
    return make(a.value().transpose(), {a}, [](Node& s) { P(s, 0).accumulate(s.grad.transpose()); });
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    return make(a.value() + b.value(), {a, b}, [](Node& s) {
        if (P(s, 0).requires_grad) P(s, 0).accumulate(s.grad);
        if (P(s, 1).requires_grad) P(s, 1).accumulate(s.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    return make(a.value() - b.value(), {a, b}, [](Node& s) {
        if (P(s, 0).requires_grad) P(s, 0).accumulate(s.grad);
        if (P(s, 1).requires_grad) P(s, 1).accumulate(-s.grad);
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& s) {
        Node& a = P(s, 0);
        Node& b = P(s, 1);
        if (a.requires_grad) a.accumulate(s.grad.cwiseProduct(b.value));
        if (b.requires_grad) b.accumulate(s.grad.cwiseProduct(a.value));
    });
}

Var scale(const Var& a, double k) {
    return make(a.value() * k, {a}, [k](Node& s) { P(s, 0).accumulate(s.grad * k); });
}

Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeMismatch("add_row: bias width");
    Matrix v = a.value();
    v.rowwise() += row.value().row(0);
    return make(std::move(v), {a, row}, [](Node& s) {
        if (P(s, 0).requires_grad) P(s, 0).accumulate(s.grad);
        if (P(s, 1).requires_grad) P(s, 1).accumulate(s.grad.colwise().sum());
    });
}

Var add_const(const Var& a, const Matrix& c) {
    if (a.rows() != c.rows() || a.cols() != c.cols()) throw ShapeMismatch("add_const");
    return make(a.value() + c, {a}, [](Node& s) { P(s, 0).accumulate(s.grad); });
}

Var gelu(const Var& a) {
    static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double kA = 0.044715;
    const Matrix& x = a.value();
    Matrix th = (kC * (x.array() + kA * x.array().cube())).tanh().matrix();
    Matrix y = (0.5 * x.array() * (1.0 + th.array())).matrix();
    return make(std::move(y), {a}, [th](Node& s) {
        const Matrix& x = P(s, 0).value;
        Eigen::ArrayXXd d = 0.5 * (1.0 + th.array()) +
                            0.5 * x.array() * (1.0 - th.array().square()) * kC *
                                (1.0 + 3.0 * kA * x.array().square());
        P(s, 0).accumulate((s.grad.array() * d).matrix());
    });
}

Matrix softmax(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        Eigen::RowVectorXd e = (m.row(r).array() - mx).exp().matrix();
        out.row(r) = e / e.sum();
    }
    return out;
}

Var softmax_rows(const Var& a) {
    Matrix y = softmax(a.value());
    return make(y, {a}, [](Node& s) {
        const Matrix& y = s.value;
        Eigen::VectorXd dot = (s.grad.cwiseProduct(y)).rowwise().sum();
        Matrix g = y.cwiseProduct(s.grad - dot.replicate(1, y.cols()));
        P(s, 0).accumulate(g);
    });
}

Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
    const Matrix& x = a.value();
    const auto n = static_cast<double>(x.cols());
    Eigen::VectorXd mean = x.rowwise().mean();
    Matrix centered = x.colwise() - mean;
    Eigen::VectorXd inv_std =
        ((centered.array().square().rowwise().sum() / n) + eps).rsqrt().matrix();
    Matrix xhat = centered.array().colwise() * inv_std.array();
    Matrix y = xhat.array().rowwise() * gamma.value().row(0).array();
    y.rowwise() += beta.value().row(0);
    return make(std::move(y), {a, gamma, beta}, [xhat, inv_std, n](Node& s) {
        Node& x = P(s, 0);
        Node& g = P(s, 1);
        Node& b = P(s, 2);
        if (g.requires_grad) g.accumulate(s.grad.cwiseProduct(xhat).colwise().sum());
        if (b.requires_grad) b.accumulate(s.grad.colwise().sum());
        if (x.requires_grad) {
            Matrix dxhat = s.grad.array().rowwise() * g.value.row(0).array();
            Eigen::VectorXd sum_d = dxhat.rowwise().sum();
            Eigen::VectorXd sum_dx = dxhat.cwiseProduct(xhat).rowwise().sum();
            Matrix dx = (n * dxhat).colwise() - sum_d;
            dx -= (xhat.array().colwise() * sum_dx.array()).matrix();
            dx = (dx.array().colwise() * (inv_std.array() / n)).matrix();
            x.accumulate(dx);
        }
    });
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows())
            throw ShapeMismatch("gather_rows: id " + std::to_string(ids[i]) + " out of range");
        out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    return make(std::move(out), {table}, [ids](Node& s) {
        Node& t = P(s, 0);
        Matrix g = Matrix::Zero(t.value.rows(), t.value.cols());
        for (std::size_t i = 0; i < ids.size(); ++i)
            g.row(ids[i]) += s.grad.row(static_cast<Eigen::Index>(i));
        t.accumulate(g);
    });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeMismatch("slice_rows");
    return make(a.value().middleRows(start, count), {a}, [start, count](Node& s) {
        Node& p = P(s, 0);
        Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
        g.middleRows(start, count) = s.grad;
        p.accumulate(g);
    });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeMismatch("slice_cols");
    return make(a.value().middleCols(start, count), {a}, [start, count](Node& s) {
        Node& p = P(s, 0);
        Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
        g.middleCols(start, count) = s.grad;
        p.accumulate(g);
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_cols: nothing to concatenate");
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != parts[0].rows()) throw ShapeMismatch("concat_cols: row count");
        cols += p.cols();
    }
    Matrix out(parts[0].rows(), cols);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    return make(std::move(out), parts, [](Node& s) {
        Eigen::Index c = 0;
        for (auto& p : s.parents) {
            const auto w = p->value.cols();
            if (p->requires_grad) p->accumulate(s.grad.middleCols(c, w));
            c += w;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_rows: nothing to concatenate");
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != parts[0].cols()) throw ShapeMismatch("concat_rows: column count");
        rows += p.rows();
    }
    Matrix out(rows, parts[0].cols());
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    return make(std::move(out), parts, [](Node& s) {
        Eigen::Index r = 0;
        for (auto& p : s.parents) {
            const auto h = p->value.rows();
            if (p->requires_grad) p->accumulate(s.grad.middleRows(r, h));
            r += h;
        }
    });
}

Var mean_rows(const Var& a) {
    const auto n = static_cast<double>(a.rows());
    return make(a.value().colwise().mean(), {a}, [n](Node& s) {
        Node& p = P(s, 0);
        p.accumulate(s.grad.replicate(p.value.rows(), 1) / n);
    });
}

Var sum_all(const Var& a) {
    Matrix v(1, 1);
    v(0, 0) = a.value().sum();
    return make(std::move(v), {a}, [](Node& s) {
        Node& p = P(s, 0);
        p.accumulate(Matrix::Constant(p.value.rows(), p.value.cols(), s.grad(0, 0)));
    });
}

Var element(const Var& a, Eigen::Index r, Eigen::Index c) {
    Matrix v(1, 1);
    v(0, 0) = a.value()(r, c);
    return make(std::move(v), {a}, [r, c](Node& s) {
        Node& p = P(s, 0);
        Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
        g(r, c) = s.grad(0, 0);
        p.accumulate(g);
    });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw ConfigError("dropout rate must be < 1");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix mask(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng) < p ? 0.0 : 1.0 / (1.0 - p);
    return make(a.value().cwiseProduct(mask), {a},
                [mask](Node& s) { P(s, 0).accumulate(s.grad.cwiseProduct(mask)); });
}

Var euclidean_distances(const Var& x, const Var& protos) {
    if (x.cols() != protos.cols()) throw ShapeMismatch("euclidean_distances: widths differ");
    const Matrix& X = x.value();
    const Matrix& Pm = protos.value();
    Matrix d(X.rows(), Pm.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < Pm.rows(); ++j) d(i, j) = (X.row(i) - Pm.row(j)).norm();
    return make(d, {x, protos}, [](Node& s) {
        Node& xn = P(s, 0);
        Node& pn = P(s, 1);
        const Matrix& X = xn.value;
        const Matrix& Pm = pn.value;
        Matrix gx = Matrix::Zero(X.rows(), X.cols());
        Matrix gp = Matrix::Zero(Pm.rows(), Pm.cols());
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index j = 0; j < Pm.rows(); ++j) {
                const double dij = s.value(i, j);
                const double g = s.grad(i, j);
                if (dij <= 0.0 || g == 0.0) continue;
                Eigen::RowVectorXd diff = (X.row(i) - Pm.row(j)) * (g / dij);
                gx.row(i) += diff;
                gp.row(j) -= diff;
            }
        if (xn.requires_grad) xn.accumulate(gx);
        if (pn.requires_grad) pn.accumulate(gp);
    });
}

Var min_over(const Var& a, Eigen::Index r, const std::vector<Eigen::Index>& cols) {
    if (cols.empty()) throw ShapeMismatch("min_over: empty column set");
    Eigen::Index best = cols.front();
    for (auto c : cols)
        if (a.value()(r, c) < a.value()(r, best)) best = c;
    Matrix v(1, 1);
    v(0, 0) = a.value()(r, best);
    return make(std::move(v), {a}, [r, best](Node& s) {
        Node& p = P(s, 0);
        Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
        g(r, best) = s.grad(0, 0);
        p.accumulate(g);
    });
}

Var cross_entropy(const Var& logits_row, std::size_t target, double weight) {
    if (logits_row.rows() != 1) throw ShapeMismatch("cross_entropy expects one row");
    if (static_cast<Eigen::Index>(target) >= logits_row.cols())
        throw ShapeMismatch("cross_entropy: target out of range");
    Matrix p = softmax(logits_row.value());
    const auto t = static_cast<Eigen::Index>(target);
    const double mx = logits_row.value().maxCoeff();
    const double lse = mx + std::log((logits_row.value().array() - mx).exp().sum());
    Matrix v(1, 1);
    v(0, 0) = weight * (lse - logits_row.value()(0, t));
    return make(std::move(v), {logits_row}, [p, t, weight](Node& s) {
        Matrix g = p;
        g(0, t) -= 1.0;
        P(s, 0).accumulate(g * (weight * s.grad(0, 0)));
    });
}

// ----------------------------------------------------------------- ParamSet

Var& ParamSet::add(const std::string& name, Matrix init) {
    auto [it, inserted] = params_.emplace(name, parameter(std::move(init)));
    if (!inserted) throw ConfigError("duplicate parameter '" + name + "'");
    return it->second;
}

Var& ParamSet::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ArchitectureMismatch("missing parameter '" + name + "'");
    return it->second;
}

const Var& ParamSet::at(const std::string& name) const {
    return const_cast<ParamSet*>(this)->at(name);
}

void ParamSet::zero_grad() {
    for (auto& [_, v] : params_) v.zero_grad();
}

std::size_t ParamSet::count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : params_) n += static_cast<std::size_t>(v.value().size());
    return n;
}

std::uint64_t ParamSet::hash(const std::string& prefix) const {
    std::uint64_t h = fnv1a("");
    for (const auto& [name, v] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        h = fnv1a(name, h);
        const std::int64_t shape[2] = {v.rows(), v.cols()};
        h = fnv1a_bytes(shape, sizeof(shape), h);
        h = fnv1a_bytes(v.value().data(), sizeof(double) * static_cast<std::size_t>(v.value().size()), h);
    }
    return h;
}

Matrix xavier(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

Matrix normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

void Adam::step(ParamSet& params, double batch) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (auto& [name, v] : params.items()) {
        if (v.grad().size() == 0) continue;
        Matrix g = v.grad() / batch;
        auto& [m, s] = moments_[name];
        if (m.size() == 0) {
            m = Matrix::Zero(g.rows(), g.cols());
            s = Matrix::Zero(g.rows(), g.cols());
        }
        m = opts_.beta1 * m + (1.0 - opts_.beta1) * g;
        s = opts_.beta2 * s + (1.0 - opts_.beta2) * g.cwiseProduct(g);
        Matrix& w = v.mutable_value();
        if (opts_.weight_decay > 0) w *= (1.0 - opts_.lr * opts_.weight_decay);
        w.array() -= opts_.lr * (m.array() / bc1) / ((s.array() / bc2).sqrt() + opts_.eps);
        v.zero_grad();
    }
}

double cosine_lr(double base, long step, long total) {
    if (total <= 0) return base;
    const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
    return base * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
}

}  // namespace fallacy::nn
