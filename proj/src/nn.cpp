#include "vesselnav/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace vn::nn {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*ln(2*pi)

void guard_finite(const Tensor& t, const char* what) {
    for (double x : t.v) {
        if (!std::isfinite(x))
            fail(ErrorKind::Internal, std::string("non-finite value out of ") + what);
    }
}

} // namespace

// --- Graph ----------------------------------------------------------------

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

const Graph::Node& Graph::node(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
        fail(ErrorKind::Internal, "bad graph node id");
    return nodes_[id];
}

const Tensor& Graph::value(int id) const { return node(id).val; }

const Tensor& Graph::grad(int id) const {
    const Node& n = node(id);
    if (n.grd.v.empty()) fail(ErrorKind::Lifecycle, "gradient not populated; run backward");
    return n.grd;
}

void Graph::check_same_shape(int a, int b, const char* what) const {
    if (!node(a).val.same_shape(node(b).val))
        fail(ErrorKind::Parameter, std::string("shape mismatch in ") + what);
}

int Graph::constant(Tensor t) {
    Node n;
    n.op = Op::Const;
    n.val = std::move(t);
    return push(std::move(n));
}

int Graph::constant_scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return constant(std::move(t));
}

int Graph::param(Param& p) {
    Node n;
    n.op = Op::ParamLeaf;
    n.bound = &p;
    n.val = p.value;
    return push(std::move(n));
}

int Graph::affine(int x, int w, int b) {
    const Tensor& X = node(x).val;
    const Tensor& W = node(w).val;
    const Tensor& B = node(b).val;
    if (X.cols != W.rows)
        fail(ErrorKind::Parameter, "shape mismatch in affine: input vs weight");
    if (B.rows != 1 || B.cols != W.cols)
        fail(ErrorKind::Parameter, "shape mismatch in affine: bias");
    Node n;
    n.op = Op::Affine;
    n.a = x;
    n.b = w;
    n.c = b;
    n.val = Tensor(X.rows, W.cols);
    for (int i = 0; i < X.rows; ++i) {
        for (int j = 0; j < W.cols; ++j) n.val.at(i, j) = B.at(0, j);
        for (int k = 0; k < X.cols; ++k) {
            double xv = X.at(i, k);
            if (xv == 0.0) continue;
            for (int j = 0; j < W.cols; ++j) n.val.at(i, j) += xv * W.at(k, j);
        }
    }
    guard_finite(n.val, "affine");
    return push(std::move(n));
}

int Graph::relu(int x) {
    Node n;
    n.op = Op::Relu;
    n.a = x;
    n.val = node(x).val;
    for (double& v : n.val.v) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

int Graph::tanh_op(int x) {
    Node n;
    n.op = Op::Tanh;
    n.a = x;
    n.val = node(x).val;
    for (double& v : n.val.v) v = std::tanh(v);
    return push(std::move(n));
}

int Graph::exp_op(int x) {
    Node n;
    n.op = Op::Exp;
    n.a = x;
    n.val = node(x).val;
    for (double& v : n.val.v) v = std::exp(v);
    guard_finite(n.val, "exp");
    return push(std::move(n));
}

int Graph::log_op(int x) {
    Node n;
    n.op = Op::Log;
    n.a = x;
    n.val = node(x).val;
    for (double& v : n.val.v) v = std::log(v);
    guard_finite(n.val, "log");
    return push(std::move(n));
}

int Graph::clamp(int x, double lo, double hi) {
    Node n;
    n.op = Op::Clamp;
    n.a = x;
    n.k0 = lo;
    n.k1 = hi;
    n.val = node(x).val;
    for (double& v : n.val.v) v = std::min(std::max(v, lo), hi);
    return push(std::move(n));
}

int Graph::add(int a, int b) {
    check_same_shape(a, b, "add");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.val = node(a).val;
    const Tensor& B = node(b).val;
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val.v[i] += B.v[i];
    return push(std::move(n));
}

int Graph::sub(int a, int b) {
    check_same_shape(a, b, "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.val = node(a).val;
    const Tensor& B = node(b).val;
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val.v[i] -= B.v[i];
    return push(std::move(n));
}

int Graph::mul(int a, int b) {
    check_same_shape(a, b, "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.val = node(a).val;
    const Tensor& B = node(b).val;
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val.v[i] *= B.v[i];
    guard_finite(n.val, "mul");
    return push(std::move(n));
}

int Graph::min_elem(int a, int b) {
    check_same_shape(a, b, "min");
    Node n;
    n.op = Op::Min;
    n.a = a;
    n.b = b;
    n.val = node(a).val;
    const Tensor& B = node(b).val;
    for (std::size_t i = 0; i < n.val.size(); ++i)
        n.val.v[i] = std::min(n.val.v[i], B.v[i]);
    return push(std::move(n));
}

int Graph::scale_add(int x, double k, double c) {
    Node n;
    n.op = Op::ScaleAdd;
    n.a = x;
    n.k0 = k;
    n.k1 = c;
    n.val = node(x).val;
    for (double& v : n.val.v) v = k * v + c;
    guard_finite(n.val, "scale_add");
    return push(std::move(n));
}

int Graph::sum_cols(int x) {
    const Tensor& X = node(x).val;
    Node n;
    n.op = Op::SumCols;
    n.a = x;
    n.val = Tensor(X.rows, 1);
    for (int i = 0; i < X.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < X.cols; ++j) s += X.at(i, j);
        n.val.at(i, 0) = s;
    }
    return push(std::move(n));
}

int Graph::mean_all(int x) {
    const Tensor& X = node(x).val;
    if (X.size() == 0) fail(ErrorKind::Parameter, "mean of empty tensor");
    Node n;
    n.op = Op::MeanAll;
    n.a = x;
    n.val = Tensor(1, 1);
    double s = 0.0;
    for (double v : X.v) s += v;
    n.val.v[0] = s / static_cast<double>(X.size());
    return push(std::move(n));
}

int Graph::concat_cols(int a, int b) {
    const Tensor& A = node(a).val;
    const Tensor& B = node(b).val;
    if (A.rows != B.rows) fail(ErrorKind::Parameter, "shape mismatch in concat");
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.val = Tensor(A.rows, A.cols + B.cols);
    for (int i = 0; i < A.rows; ++i) {
        for (int j = 0; j < A.cols; ++j) n.val.at(i, j) = A.at(i, j);
        for (int j = 0; j < B.cols; ++j) n.val.at(i, A.cols + j) = B.at(i, j);
    }
    return push(std::move(n));
}

void Graph::backward(int loss) {
    Node& top = nodes_[loss];
    if (top.val.rows != 1 || top.val.cols != 1)
        fail(ErrorKind::Parameter, "backward needs a scalar loss");
    guard_finite(top.val, "loss");
    for (Node& n : nodes_) {
        n.grd = Tensor(n.val.rows, n.val.cols);
    }
    nodes_[loss].grd.v[0] = 1.0;

    for (int id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        const Tensor& gy = n.grd;
        bool any = false;
        for (double g : gy.v) {
            if (g != 0.0) {
                any = true;
                break;
            }
        }
        if (!any) continue;
        switch (n.op) {
            case Op::Const:
            case Op::ParamLeaf:
                break;
            case Op::Affine: {
                Node& xn = nodes_[n.a];
                Node& wn = nodes_[n.b];
                Node& bn = nodes_[n.c];
                const Tensor& X = xn.val;
                const Tensor& W = wn.val;
                for (int i = 0; i < X.rows; ++i) {
                    for (int j = 0; j < W.cols; ++j) {
                        double g = gy.at(i, j);
                        if (g == 0.0) continue;
                        bn.grd.at(0, j) += g;
                        for (int k = 0; k < X.cols; ++k) {
                            xn.grd.at(i, k) += g * W.at(k, j);
                            wn.grd.at(k, j) += g * X.at(i, k);
                        }
                    }
                }
                break;
            }
            case Op::Relu: {
                Node& xn = nodes_[n.a];
                for (std::size_t i = 0; i < gy.v.size(); ++i)
                    if (xn.val.v[i] > 0.0) xn.grd.v[i] += gy.v[i];
                break;
            }
            case Op::Tanh: {
                Node& xn = nodes_[n.a];
                for (std::size_t i = 0; i < gy.v.size(); ++i)
                    xn.grd.v[i] += gy.v[i] * (1.0 - n.val.v[i] * n.val.v[i]);
                break;
            }
            case Op::Exp: {
                Node& xn = nodes_[n.a];
                for (std::size_t i = 0; i < gy.v.size(); ++i)
                    xn.grd.v[i] += gy.v[i] * n.val.v[i];
                break;
            }
            case Op::Log: {
                Node& xn = nodes_[n.a];
                for (std::size_t i = 0; i < gy.v.size(); ++i)
                    xn.grd.v[i] += gy.v[i] / xn.val.v[i];
                break;
            }
            case Op::Clamp: {
                Node& xn = nodes_[n.a];
                for (std::size_t i = 0; i < gy.v.size(); ++i) {
                    double x = xn.val.v[i];
                    if (x >= n.k0 && x <= n.k1) xn.grd.v[i] += gy.v[i];
                }
                break;
            }
            case Op::Add: {
                Node& an = nodes_[n.a];
                Node& bn = nodes_[n.b];
                for (std::size_t i = 0; i < gy.v.size(); ++i) {
                    an.grd.v[i] += gy.v[i];
                    bn.grd.v[i] += gy.v[i];
                }
                break;
            }
            case Op::Sub: {
                Node& an = nodes_[n.a];
                Node& bn = nodes_[n.b];
                for (std::size_t i = 0; i < gy.v.size(); ++i) {
                    an.grd.v[i] += gy.v[i];
                    bn.grd.v[i] -= gy.v[i];
                }
                break;
            }
            case Op::Mul: {
                Node& an = nodes_[n.a];
                Node& bn = nodes_[n.b];
                for (std::size_t i = 0; i < gy.v.size(); ++i) {
                    an.grd.v[i] += gy.v[i] * bn.val.v[i];
                    bn.grd.v[i] += gy.v[i] * an.val.v[i];
                }
                break;
            }
            case Op::Min: {
                Node& an = nodes_[n.a];
                Node& bn = nodes_[n.b];
                for (std::size_t i = 0; i < gy.v.size(); ++i) {
                    if (an.val.v[i] <= bn.val.v[i])
                        an.grd.v[i] += gy.v[i];
                    else
                        bn.grd.v[i] += gy.v[i];
                }
                break;
            }
            case Op::ScaleAdd: {
                Node& xn = nodes_[n.a];
                for (std::size_t i = 0; i < gy.v.size(); ++i)
                    xn.grd.v[i] += gy.v[i] * n.k0;
                break;
            }
            case Op::SumCols: {
                Node& xn = nodes_[n.a];
                const Tensor& X = xn.val;
                for (int i = 0; i < X.rows; ++i) {
                    double g = gy.at(i, 0);
                    if (g == 0.0) continue;
                    for (int j = 0; j < X.cols; ++j) xn.grd.at(i, j) += g;
                }
                break;
            }
            case Op::MeanAll: {
                Node& xn = nodes_[n.a];
                double g = gy.v[0] / static_cast<double>(xn.val.size());
                for (double& gv : xn.grd.v) gv += g;
                break;
            }
            case Op::ConcatCols: {
                Node& an = nodes_[n.a];
                Node& bn = nodes_[n.b];
                const Tensor& A = an.val;
                const Tensor& B = bn.val;
                for (int i = 0; i < A.rows; ++i) {
                    for (int j = 0; j < A.cols; ++j)
                        an.grd.at(i, j) += gy.at(i, j);
                    for (int j = 0; j < B.cols; ++j)
                        bn.grd.at(i, j) += gy.at(i, A.cols + j);
                }
                break;
            }
        }
    }

    for (Node& n : nodes_) {
        if (n.op == Op::ParamLeaf && n.bound != nullptr) {
            for (std::size_t i = 0; i < n.grd.v.size(); ++i)
                n.bound->grad.v[i] += n.grd.v[i];
        }
    }
}

// --- layers ---------------------------------------------------------------

Linear::Linear(int in, int out, Rng& rng) : W(in, out), b(1, out) {
    double k = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : W.value.v) v = rng.uniform(-k, k);
    for (double& v : b.value.v) v = rng.uniform(-k, k);
}

Tensor Linear::forward_raw(const Tensor& x) const {
    if (x.cols != W.value.rows)
        fail(ErrorKind::Parameter, "shape mismatch in linear forward");
    Tensor y(x.rows, W.value.cols);
    for (int i = 0; i < x.rows; ++i) {
        for (int j = 0; j < y.cols; ++j) y.at(i, j) = b.value.at(0, j);
        for (int k = 0; k < x.cols; ++k) {
            double xv = x.at(i, k);
            if (xv == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) y.at(i, j) += xv * W.value.at(k, j);
        }
    }
    return y;
}

int Linear::forward(Graph& g, int x) { return g.affine(x, g.param(W), g.param(b)); }

Mlp::Mlp(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2) fail(ErrorKind::Parameter, "mlp needs at least two sizes");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
        layers.emplace_back(sizes[i], sizes[i + 1], rng);
}

Tensor Mlp::forward_raw(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward_raw(h);
        if (i + 1 < layers.size())
            for (double& v : h.v) v = v > 0.0 ? v : 0.0;
    }
    return h;
}

int Mlp::forward(Graph& g, int x) {
    int h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(g, h);
        if (i + 1 < layers.size()) h = g.relu(h);
    }
    return h;
}

Tensor Mlp::features_raw(const Tensor& x) const {
    Tensor h = x;
    for (const Linear& l : layers) {
        h = l.forward_raw(h);
        for (double& v : h.v) v = v > 0.0 ? v : 0.0;
    }
    return h;
}

int Mlp::features(Graph& g, int x) {
    int h = x;
    for (Linear& l : layers) h = g.relu(l.forward(g, h));
    return h;
}

std::vector<Param*> Mlp::params() {
    std::vector<Param*> out;
    for (Linear& l : layers) {
        out.push_back(&l.W);
        out.push_back(&l.b);
    }
    return out;
}

// --- Gaussian head --------------------------------------------------------

GaussianHead::GaussianHead(int feature_dim, int action_dim, Rng& rng)
    : mean(feature_dim, action_dim, rng), log_std(feature_dim, action_dim, rng) {}

GaussianHead::Sample GaussianHead::sample_raw(const Tensor& features, Rng& rng) const {
    if (features.rows != 1) fail(ErrorKind::Parameter, "sample_raw wants one row");
    Tensor mu = mean.forward_raw(features);
    Tensor ls = log_std.forward_raw(features);
    Sample s;
    int d = mu.cols;
    s.action.resize(d);
    s.pre_squash.resize(d);
    for (int j = 0; j < d; ++j) {
        double lsj = std::min(std::max(ls.at(0, j), kLogStdMin), kLogStdMax);
        double sigma = std::exp(lsj);
        double eps = rng.normal();
        double pre = mu.at(0, j) + sigma * eps;
        double a = std::tanh(pre);
        s.pre_squash[j] = pre;
        s.action[j] = a;
        s.log_prob += -0.5 * eps * eps - lsj - kHalfLog2Pi -
                      std::log(1.0 - a * a + kSquashEps);
    }
    return s;
}

std::vector<double> GaussianHead::mean_action_raw(const Tensor& features) const {
    if (features.rows != 1) fail(ErrorKind::Parameter, "mean_action_raw wants one row");
    Tensor mu = mean.forward_raw(features);
    std::vector<double> a(mu.cols);
    for (int j = 0; j < mu.cols; ++j) a[j] = std::tanh(mu.at(0, j));
    return a;
}

double GaussianHead::log_prob_raw(const Tensor& features,
                                  const std::vector<double>& action) const {
    if (features.rows != 1) fail(ErrorKind::Parameter, "log_prob_raw wants one row");
    Tensor mu = mean.forward_raw(features);
    Tensor ls = log_std.forward_raw(features);
    if (static_cast<int>(action.size()) != mu.cols)
        fail(ErrorKind::Parameter, "action dimension mismatch");
    double lp = 0.0;
    for (int j = 0; j < mu.cols; ++j) {
        double a = std::min(std::max(action[j], -1.0 + 1e-12), 1.0 - 1e-12);
        double pre = std::atanh(a);
        double lsj = std::min(std::max(ls.at(0, j), kLogStdMin), kLogStdMax);
        double sigma = std::exp(lsj);
        double z = (pre - mu.at(0, j)) / sigma;
        lp += -0.5 * z * z - lsj - kHalfLog2Pi - std::log(1.0 - a * a + kSquashEps);
    }
    return lp;
}

std::pair<int, int> GaussianHead::sample_graph(Graph& g, int features,
                                               const Tensor& eps) {
    int mu = mean.forward(g, features);
    int ls = g.clamp(log_std.forward(g, features), kLogStdMin, kLogStdMax);
    int sigma = g.exp_op(ls);
    const Tensor& mu_val = g.value(mu);
    if (!eps.same_shape(mu_val))
        fail(ErrorKind::Parameter, "noise shape mismatch in sample_graph");
    int eps_node = g.constant(eps);
    int pre = g.add(mu, g.mul(sigma, eps_node));
    int action = g.tanh_op(pre);

    // log N(pre; mu, sigma) = -eps^2/2 - log sigma - log sqrt(2 pi), since
    // (pre - mu)/sigma is exactly the injected noise.
    Tensor base(eps.rows, eps.cols);
    for (std::size_t i = 0; i < eps.v.size(); ++i)
        base.v[i] = -0.5 * eps.v[i] * eps.v[i] - kHalfLog2Pi;
    int gaussian = g.sub(g.constant(base), ls);
    int squash = g.log_op(g.scale_add(g.mul(action, action), -1.0, 1.0 + kSquashEps));
    int log_prob = g.sum_cols(g.sub(gaussian, squash));
    return {action, log_prob};
}

std::vector<Param*> GaussianHead::params() {
    return {&mean.W, &mean.b, &log_std.W, &log_std.b};
}

// --- optimizer ------------------------------------------------------------

void Adam::step(const std::vector<Param*>& params) {
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Param* p : params) {
        for (std::size_t i = 0; i < p->value.v.size(); ++i) {
            double g = p->grad.v[i];
            p->m.v[i] = beta1_ * p->m.v[i] + (1.0 - beta1_) * g;
            p->v2.v[i] = beta2_ * p->v2.v[i] + (1.0 - beta2_) * g * g;
            double mhat = p->m.v[i] / c1;
            double vhat = p->v2.v[i] / c2;
            p->value.v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        guard_finite(p->value, "optimizer step");
    }
}

// --- checkpoints ----------------------------------------------------------

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) fail(ErrorKind::Load, "truncated checkpoint");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(data[pos]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(data[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data[pos + i])) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(bits);
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data.substr(pos, n);
        pos += n;
        return s;
    }
};

constexpr char kMagic[] = "VNCKPT01";

} // namespace

void save_tensors(const std::string& path,
                  const std::map<std::string, Tensor>& tensors) {
    std::string out;
    out.append(kMagic, 8);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) fail(ErrorKind::Parameter, "tensor name too long");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t.rows));
        put_u32(out, static_cast<std::uint32_t>(t.cols));
        for (double d : t.v) put_f64(out, d);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) fail(ErrorKind::Io, "checkpoint write failed: " + path);
}

std::map<std::string, Tensor> load_tensors(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Load, "cannot open checkpoint: " + path);
    std::string data((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    Reader r{data};
    if (r.bytes(8) != std::string(kMagic, 8))
        fail(ErrorKind::Load, "bad checkpoint magic: " + path);
    std::uint32_t count = r.u32();
    std::map<std::string, Tensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t len = r.u16();
        std::string name = r.bytes(len);
        std::uint32_t rows = r.u32();
        std::uint32_t cols = r.u32();
        if (rows > 1u << 20 || cols > 1u << 20)
            fail(ErrorKind::Load, "implausible tensor shape in checkpoint");
        Tensor t(static_cast<int>(rows), static_cast<int>(cols));
        for (double& d : t.v) d = r.f64();
        out[name] = std::move(t);
    }
    if (r.pos != data.size()) fail(ErrorKind::Load, "trailing bytes in checkpoint");
    return out;
}

} // namespace vn::nn
