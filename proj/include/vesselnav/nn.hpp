#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vesselnav/error.hpp"
#include "vesselnav/rng.hpp"

namespace vn::nn {

// Reverse-mode automatic differentiation over 2-D tensors, plus the dense
// layers, squashed-Gaussian head and moment-based optimizer needed for SAC.
// Matrices are row-major; batches are rows. A Graph records one computation;
// backward() accumulates into the bound parameters' grad buffers.

struct Tensor {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

/// Trainable tensor: value, gradient accumulator and optimizer moments.
struct Param {
    Tensor value;
    Tensor grad;
    Tensor m;   // first moment
    Tensor v2;  // second moment

    Param() = default;
    Param(int rows, int cols)
        : value(rows, cols), grad(rows, cols), m(rows, cols), v2(rows, cols) {}

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

class Graph {
public:
    int constant(Tensor t);
    int constant_scalar(double x);
    /// Parameter leaf; backward() adds this node's gradient into p.grad.
    int param(Param& p);

    int affine(int x, int w, int b);        // x[r,m]*W[m,n] + b[1,n]
    int relu(int x);
    int tanh_op(int x);
    int exp_op(int x);
    int log_op(int x);
    int clamp(int x, double lo, double hi);  // gradient passes inside the range
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);                  // elementwise
    int min_elem(int a, int b);             // ties route gradient to the first
    int scale_add(int x, double k, double c);  // k*x + c
    int sum_cols(int x);                    // [r,n] -> [r,1]
    int mean_all(int x);                    // -> [1,1]
    int concat_cols(int a, int b);

    const Tensor& value(int id) const;
    const Tensor& grad(int id) const;

    /// Reverse accumulation from a scalar loss; flushes parameter gradients.
    void backward(int loss);

private:
    enum class Op {
        Const, ParamLeaf, Affine, Relu, Tanh, Exp, Log, Clamp, Add, Sub, Mul,
        Min, ScaleAdd, SumCols, MeanAll, ConcatCols,
    };
    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        double k0 = 0.0, k1 = 0.0;
        Param* bound = nullptr;
        Tensor val;
        Tensor grd;
    };
    std::vector<Node> nodes_;

    int push(Node n);
    const Node& node(int id) const;
    void check_same_shape(int a, int b, const char* what) const;
};

/// Dense layer with the conventional fan-in uniform initialization.
struct Linear {
    Param W;  // [in, out]
    Param b;  // [1, out]

    Linear() = default;
    Linear(int in, int out, Rng& rng);

    Tensor forward_raw(const Tensor& x) const;       // no tape
    int forward(Graph& g, int x);                    // taped
    int in_dim() const { return W.value.rows; }
    int out_dim() const { return W.value.cols; }
};

/// Multi-layer perceptron: rectifier between layers, linear final output.
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    Mlp(const std::vector<int>& sizes, Rng& rng);

    Tensor forward_raw(const Tensor& x) const;
    int forward(Graph& g, int x);
    /// Like forward_raw but stops after the last hidden rectifier.
    Tensor features_raw(const Tensor& x) const;
    int features(Graph& g, int x);

    std::vector<Param*> params();
};

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kSquashEps = 1e-6;

/// Gaussian action head with tanh squashing: a = tanh(mu + sigma * eps),
/// log-density corrected by -log(1 - a^2 + eps) per dimension.
struct GaussianHead {
    Linear mean;
    Linear log_std;

    GaussianHead() = default;
    GaussianHead(int feature_dim, int action_dim, Rng& rng);

    int action_dim() const { return mean.out_dim(); }

    struct Sample {
        std::vector<double> action;    // in (-1, 1)
        double log_prob = 0.0;
        std::vector<double> pre_squash;
    };
    /// Stochastic sample for one feature row; draws action_dim normals.
    Sample sample_raw(const Tensor& features, Rng& rng) const;
    /// Deterministic action: tanh(mu).
    std::vector<double> mean_action_raw(const Tensor& features) const;
    /// Log-density of a given action under the squashed Gaussian (no tape).
    double log_prob_raw(const Tensor& features, const std::vector<double>& action) const;

    /// Taped reparameterized sample: returns (action node [r,d], log-prob
    /// node [r,1]) for a fixed noise tensor eps.
    std::pair<int, int> sample_graph(Graph& g, int features, const Tensor& eps);

    std::vector<Param*> params();
};

/// First-order adaptive optimizer with bias correction. One instance owns the
/// step counter for the parameter set it updates.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Param*>& params);
    long steps_taken() const { return t_; }
    void set_steps_taken(long t) { t_ = t; }
    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

// --- checkpoints ----------------------------------------------------------
//
// Binary layout: 8-byte magic "VNCKPT01", u32 tensor count, then per tensor:
// u16 name length, name bytes, u32 rows, u32 cols, rows*cols little-endian
// IEEE-754 doubles. Save -> load -> save is bit-identical.

void save_tensors(const std::string& path,
                  const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> load_tensors(const std::string& path);

} // namespace vn::nn
