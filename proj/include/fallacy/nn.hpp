#pragma once

// Minimal reverse-mode autodiff over dense double matrices. Enough to train
// the small transformer encoders, attention adapters, prototype layers and
// classification heads used by the reasoning methods.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fallacy::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(const Matrix& g);
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() { return node_->value; }
    const Matrix& grad() const { return node_->grad; }
    void zero_grad() { node_->grad.resize(0, 0); }
    bool requires_grad() const { return node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double scalar() const { return node_->value(0, 0); }
    const std::shared_ptr<Node>& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node> node_;
};

Var constant(Matrix m);
Var parameter(Matrix m);

// Runs backpropagation from a 1x1 value.
void backward(const Var& loss);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var add_row(const Var& a, const Var& row);      // broadcast a 1xC row over every row of a
Var add_const(const Var& a, const Matrix& c);   // c carries no gradient
Var gelu(const Var& a);                         // tanh approximation
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
Var gather_rows(const Var& table, const std::vector<int>& ids);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var mean_rows(const Var& a);  // -> 1 x cols
Var sum_all(const Var& a);    // -> 1 x 1
Var element(const Var& a, Eigen::Index r, Eigen::Index c);
Var dropout(const Var& a, double p, std::mt19937_64& rng);

// Euclidean distance from every row of `x` (N x D) to every row of
// `protos` (P x D) -> N x P. Gradient at zero distance is taken as 0.
Var euclidean_distances(const Var& x, const Var& protos);

// Minimum over the listed columns of row `r` -> 1x1; gradient flows to the argmin.
Var min_over(const Var& a, Eigen::Index r, const std::vector<Eigen::Index>& cols);

// Weighted cross-entropy of one row of logits against `target` -> 1x1.
Var cross_entropy(const Var& logits_row, std::size_t target, double weight = 1.0);

Matrix softmax(const Matrix& logits_row);

// Ordered named parameter collection.
class ParamSet {
public:
    Var& add(const std::string& name, Matrix init);
    Var& at(const std::string& name);
    const Var& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }
    const std::map<std::string, Var>& items() const { return params_; }
    std::map<std::string, Var>& items() { return params_; }
    void zero_grad();
    std::size_t count() const;  // total scalar count

    // FNV-1a over names, shapes and raw values of params whose name starts with prefix.
    std::uint64_t hash(const std::string& prefix = "") const;

private:
    std::map<std::string, Var> params_;
};

Matrix xavier(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Matrix normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW)
};

class Adam {
public:
    explicit Adam(AdamOptions opts = {}) : opts_(opts) {}
    void set_lr(double lr) { opts_.lr = lr; }
    double lr() const { return opts_.lr; }
    // Applies accumulated gradients (averaged by `batch`) and clears them.
    void step(ParamSet& params, double batch = 1.0);

private:
    AdamOptions opts_;
    std::map<std::string, std::pair<Matrix, Matrix>> moments_;
    long t_ = 0;
};

// Cosine decay from the base rate to zero over `total` steps.
double cosine_lr(double base, long step, long total);

}  // namespace fallacy::nn
