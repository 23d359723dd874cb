#include "advf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace advf {

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Input: return "input";
        case OpKind::Param: return "param";
        case OpKind::Conv2d: return "conv2d";
        case OpKind::Relu: return "relu";
        case OpKind::MaxPool: return "maxpool";
        case OpKind::Dense: return "dense";
        case OpKind::Flatten: return "flatten";
        case OpKind::Add: return "add";
        case OpKind::Scale: return "scale";
        case OpKind::Mul: return "mul";
        case OpKind::SumAll: return "sum_all";
        case OpKind::SoftmaxCE: return "softmax_ce";
    }
    return "?";
}

namespace {

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + ": " + detail);
}

}  // namespace

void Graph::check_id(int id, const char* where) const {
    if (id < 0 || id >= size()) {
        throw std::invalid_argument(std::string(where) + ": node id " + std::to_string(id) + " out of range");
    }
}

int Graph::push(Node n) {
    for (int i : n.in) {
        if (i < 0 || i >= size()) {
            throw std::invalid_argument("graph: input id must precede the node (acyclic tape)");
        }
    }
    nodes_.push_back(std::move(n));
    forward_terminal_ = -1;  // topology changed, cached activations stale
    return size() - 1;
}

int Graph::input(const std::string& name, Shape shape) {
    Node n;
    n.kind = OpKind::Input;
    n.name = name;
    n.out = Tensor(std::move(shape));
    return push(std::move(n));
}

int Graph::param(int weight_index) {
    if (!weights_) throw std::logic_error("graph: param node requires bound weights");
    if (weight_index < 0 || weight_index >= static_cast<int>(weights_->size())) {
        throw std::invalid_argument("graph: weight index out of range");
    }
    Node n;
    n.kind = OpKind::Param;
    n.param_index = weight_index;
    n.out = Tensor((*weights_)[static_cast<size_t>(weight_index)].shape);
    return push(std::move(n));
}

int Graph::conv2d(int x, int w, int b, int stride, int pad) {
    check_id(x, "conv2d");
    check_id(w, "conv2d");
    check_id(b, "conv2d");
    if (stride < 1 || pad < 0) shape_error("conv2d", "stride must be >=1 and pad >=0");
    const Tensor& xt = nodes_[static_cast<size_t>(x)].out;
    const Tensor& wt = nodes_[static_cast<size_t>(w)].out;
    const Tensor& bt = nodes_[static_cast<size_t>(b)].out;
    if (xt.shape.size() != 3) shape_error("conv2d", "input must be HxWxC, got " + shape_str(xt.shape));
    if (wt.shape.size() != 4) shape_error("conv2d", "kernel must be KHxKWxCxOC, got " + shape_str(wt.shape));
    if (wt.shape[2] != xt.shape[2]) {
        shape_error("conv2d", "kernel channels " + shape_str(wt.shape) + " do not match input " + shape_str(xt.shape));
    }
    if (bt.shape.size() != 1 || bt.shape[0] != wt.shape[3]) {
        shape_error("conv2d", "bias must be [OC], got " + shape_str(bt.shape));
    }
    int oh = (xt.shape[0] + 2 * pad - wt.shape[0]) / stride + 1;
    int ow = (xt.shape[1] + 2 * pad - wt.shape[1]) / stride + 1;
    if (xt.shape[0] + 2 * pad < wt.shape[0] || xt.shape[1] + 2 * pad < wt.shape[1]) {
        shape_error("conv2d", "kernel larger than padded input");
    }
    Node n;
    n.kind = OpKind::Conv2d;
    n.in = {x, w, b};
    n.stride = stride;
    n.pad = pad;
    n.out = Tensor({oh, ow, wt.shape[3]});
    return push(std::move(n));
}

int Graph::relu(int x) {
    check_id(x, "relu");
    Node n;
    n.kind = OpKind::Relu;
    n.in = {x};
    n.out = Tensor(nodes_[static_cast<size_t>(x)].out.shape);
    return push(std::move(n));
}

int Graph::maxpool(int x, int k) {
    check_id(x, "maxpool");
    if (k < 1) shape_error("maxpool", "window must be >=1");
    const Tensor& xt = nodes_[static_cast<size_t>(x)].out;
    if (xt.shape.size() != 3) shape_error("maxpool", "input must be HxWxC");
    int oh = xt.shape[0] / k;
    int ow = xt.shape[1] / k;
    if (oh < 1 || ow < 1) shape_error("maxpool", "window larger than input");
    Node n;
    n.kind = OpKind::MaxPool;
    n.in = {x};
    n.pool_k = k;
    n.out = Tensor({oh, ow, xt.shape[2]});
    n.aux_idx.assign(n.out.v.size(), -1);
    return push(std::move(n));
}

int Graph::dense(int x, int w, int b) {
    check_id(x, "dense");
    check_id(w, "dense");
    check_id(b, "dense");
    const Tensor& xt = nodes_[static_cast<size_t>(x)].out;
    const Tensor& wt = nodes_[static_cast<size_t>(w)].out;
    const Tensor& bt = nodes_[static_cast<size_t>(b)].out;
    if (xt.shape.size() != 1) shape_error("dense", "input must be flat, got " + shape_str(xt.shape));
    if (wt.shape.size() != 2 || wt.shape[0] != xt.shape[0]) {
        shape_error("dense", "weight " + shape_str(wt.shape) + " incompatible with input " + shape_str(xt.shape));
    }
    if (bt.shape.size() != 1 || bt.shape[0] != wt.shape[1]) shape_error("dense", "bias must be [out]");
    Node n;
    n.kind = OpKind::Dense;
    n.in = {x, w, b};
    n.out = Tensor({wt.shape[1]});
    return push(std::move(n));
}

int Graph::flatten(int x) {
    check_id(x, "flatten");
    Node n;
    n.kind = OpKind::Flatten;
    n.in = {x};
    n.out = Tensor({static_cast<int>(nodes_[static_cast<size_t>(x)].out.numel())});
    return push(std::move(n));
}

int Graph::add(int a, int b) {
    check_id(a, "add");
    check_id(b, "add");
    const Tensor& at = nodes_[static_cast<size_t>(a)].out;
    const Tensor& bt = nodes_[static_cast<size_t>(b)].out;
    if (at.shape != bt.shape) {
        shape_error("add", "operands " + shape_str(at.shape) + " vs " + shape_str(bt.shape));
    }
    Node n;
    n.kind = OpKind::Add;
    n.in = {a, b};
    n.out = Tensor(at.shape);
    return push(std::move(n));
}

int Graph::scale(int x, float c) {
    check_id(x, "scale");
    Node n;
    n.kind = OpKind::Scale;
    n.in = {x};
    n.scale_c = c;
    n.out = Tensor(nodes_[static_cast<size_t>(x)].out.shape);
    return push(std::move(n));
}

int Graph::mul(int a, int b) {
    check_id(a, "mul");
    check_id(b, "mul");
    const Tensor& at = nodes_[static_cast<size_t>(a)].out;
    const Tensor& bt = nodes_[static_cast<size_t>(b)].out;
    if (at.shape != bt.shape) {
        shape_error("mul", "operands " + shape_str(at.shape) + " vs " + shape_str(bt.shape));
    }
    Node n;
    n.kind = OpKind::Mul;
    n.in = {a, b};
    n.out = Tensor(at.shape);
    return push(std::move(n));
}

int Graph::sum_all(int x) {
    check_id(x, "sum_all");
    Node n;
    n.kind = OpKind::SumAll;
    n.in = {x};
    n.out = Tensor({1});
    return push(std::move(n));
}

int Graph::softmax_ce(int logits, int target_label) {
    check_id(logits, "softmax_ce");
    const Tensor& zt = nodes_[static_cast<size_t>(logits)].out;
    if (zt.shape.size() != 1 || zt.shape[0] < 2) {
        shape_error("softmax_ce", "logits must be a flat vector of >=2 categories");
    }
    Node n;
    n.kind = OpKind::SoftmaxCE;
    n.in = {logits};
    n.ce_target = target_label;
    n.out = Tensor({1});
    n.aux_val.assign(static_cast<size_t>(zt.shape[0]), 0.0f);
    return push(std::move(n));
}

int Graph::find_input(const std::string& name) const {
    for (int i = 0; i < size(); ++i) {
        const Node& n = nodes_[static_cast<size_t>(i)];
        if (n.kind == OpKind::Input && n.name == name) return i;
    }
    return -1;
}

void Graph::set_input(const std::string& name, const Tensor& value) {
    int id = find_input(name);
    if (id < 0) throw std::invalid_argument("graph: no input named '" + name + "'");
    set_input(id, value);
}

void Graph::set_input(int node, const Tensor& value) {
    check_id(node, "set_input");
    Node& n = nodes_[static_cast<size_t>(node)];
    if (n.kind != OpKind::Input) throw std::invalid_argument("set_input: node is not an input");
    if (n.out.shape != value.shape) {
        shape_error("set_input", "expected " + shape_str(n.out.shape) + ", got " + shape_str(value.shape));
    }
    n.out.v = value.v;
    n.value_set = true;
    forward_terminal_ = -1;
}

void Graph::set_ce_target(int node, int target_label) {
    check_id(node, "set_ce_target");
    Node& n = nodes_[static_cast<size_t>(node)];
    if (n.kind != OpKind::SoftmaxCE) throw std::invalid_argument("set_ce_target: node is not softmax_ce");
    int categories = nodes_[static_cast<size_t>(n.in[0])].out.shape[0];
    if (target_label < 0 || target_label >= categories) {
        throw std::invalid_argument("set_ce_target: label " + std::to_string(target_label) + " out of range [0," +
                                    std::to_string(categories) + ")");
    }
    n.ce_target = target_label;
    forward_terminal_ = -1;
}

void Graph::set_param_needs_grad(bool enabled) {
    for (Node& n : nodes_) {
        if (n.kind == OpKind::Param) n.needs_grad = enabled;
    }
}

void Graph::set_input_needs_grad(bool enabled) {
    for (Node& n : nodes_) {
        if (n.kind == OpKind::Input) n.needs_grad = enabled;
    }
}

const Tensor& Graph::value(int node) const {
    check_id(node, "value");
    return nodes_[static_cast<size_t>(node)].out;
}

uint64_t Graph::regime_signature() const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    for (const Node& n : nodes_) {
        if (n.kind == OpKind::Relu) {
            uint64_t acc = 0;
            int k = 0;
            for (float v : n.out.v) {
                acc = (acc << 1) | (v > 0.0f ? 1u : 0u);
                if (++k == 64) {
                    mix(acc);
                    acc = 0;
                    k = 0;
                }
            }
            mix(acc ^ static_cast<uint64_t>(k));
        } else if (n.kind == OpKind::MaxPool) {
            for (int idx : n.aux_idx) mix(static_cast<uint64_t>(idx));
        }
    }
    return h;
}

const Tensor& Graph::grad(int node) const {
    check_id(node, "grad");
    const Node& n = nodes_[static_cast<size_t>(node)];
    if (!n.touched) throw std::runtime_error("graph: no gradient computed for node " + std::to_string(node));
    return n.grad;
}

// --------------------------------------------------------------------------
// forward

void Graph::eval_node(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    switch (n.kind) {
        case OpKind::Input: {
            if (!n.value_set) throw std::invalid_argument("forward: input '" + n.name + "' not set");
            break;
        }
        case OpKind::Param: {
            const Tensor& w = (*weights_)[static_cast<size_t>(n.param_index)];
            n.out.v = w.v;
            break;
        }
        case OpKind::Conv2d: {
            const Tensor& x = in_val(n, 0);
            const Tensor& w = in_val(n, 1);
            const Tensor& b = in_val(n, 2);
            const int H = x.shape[0], W = x.shape[1], C = x.shape[2];
            const int KH = w.shape[0], KW = w.shape[1], OC = w.shape[3];
            const int OH = n.out.shape[0], OW = n.out.shape[1];
            const int s = n.stride, p = n.pad;
            std::vector<double> acc(static_cast<size_t>(OC));
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int ky = 0; ky < KH; ++ky) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < KW; ++kx) {
                            const int ix = ox * s + kx - p;
                            if (ix < 0 || ix >= W) continue;
                            const float* xp = &x.v[(static_cast<size_t>(iy) * W + ix) * C];
                            const float* wp = &w.v[(static_cast<size_t>(ky) * KW + kx) * C * OC];
                            for (int ic = 0; ic < C; ++ic) {
                                const double a = xp[ic];
                                const float* wrow = wp + static_cast<size_t>(ic) * OC;
                                for (int oc = 0; oc < OC; ++oc) acc[static_cast<size_t>(oc)] += a * wrow[oc];
                            }
                        }
                    }
                    float* op = &n.out.v[(static_cast<size_t>(oy) * OW + ox) * OC];
                    for (int oc = 0; oc < OC; ++oc) {
                        op[oc] = static_cast<float>(acc[static_cast<size_t>(oc)] + b.v[static_cast<size_t>(oc)]);
                    }
                }
            }
            break;
        }
        case OpKind::Relu: {
            const Tensor& x = in_val(n, 0);
            for (size_t i = 0; i < x.v.size(); ++i) n.out.v[i] = x.v[i] > 0.0f ? x.v[i] : 0.0f;
            break;
        }
        case OpKind::MaxPool: {
            const Tensor& x = in_val(n, 0);
            const int W = x.shape[1], C = x.shape[2];
            const int OH = n.out.shape[0], OW = n.out.shape[1];
            const int k = n.pool_k;
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    for (int c = 0; c < C; ++c) {
                        float best = -std::numeric_limits<float>::infinity();
                        int best_idx = -1;
                        for (int ky = 0; ky < k; ++ky) {
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * k + ky, ix = ox * k + kx;
                                const int64_t idx = (static_cast<int64_t>(iy) * W + ix) * C + c;
                                const float val = x.v[static_cast<size_t>(idx)];
                                if (val > best) {
                                    best = val;
                                    best_idx = static_cast<int>(idx);
                                }
                            }
                        }
                        const int64_t o = (static_cast<int64_t>(oy) * OW + ox) * C + c;
                        n.out.v[static_cast<size_t>(o)] = best;
                        n.aux_idx[static_cast<size_t>(o)] = best_idx;
                    }
                }
            }
            break;
        }
        case OpKind::Dense: {
            const Tensor& x = in_val(n, 0);
            const Tensor& w = in_val(n, 1);
            const Tensor& b = in_val(n, 2);
            const int N = x.shape[0], M = w.shape[1];
            std::vector<double> acc(static_cast<size_t>(M), 0.0);
            for (int i = 0; i < N; ++i) {
                const double a = x.v[static_cast<size_t>(i)];
                const float* wrow = &w.v[static_cast<size_t>(i) * M];
                for (int j = 0; j < M; ++j) acc[static_cast<size_t>(j)] += a * wrow[j];
            }
            for (int j = 0; j < M; ++j) {
                n.out.v[static_cast<size_t>(j)] = static_cast<float>(acc[static_cast<size_t>(j)] + b.v[static_cast<size_t>(j)]);
            }
            break;
        }
        case OpKind::Flatten: {
            n.out.v = in_val(n, 0).v;
            break;
        }
        case OpKind::Add: {
            const Tensor& a = in_val(n, 0);
            const Tensor& b = in_val(n, 1);
            for (size_t i = 0; i < a.v.size(); ++i) n.out.v[i] = a.v[i] + b.v[i];
            break;
        }
        case OpKind::Scale: {
            const Tensor& x = in_val(n, 0);
            for (size_t i = 0; i < x.v.size(); ++i) n.out.v[i] = n.scale_c * x.v[i];
            break;
        }
        case OpKind::Mul: {
            const Tensor& a = in_val(n, 0);
            const Tensor& b = in_val(n, 1);
            for (size_t i = 0; i < a.v.size(); ++i) n.out.v[i] = a.v[i] * b.v[i];
            break;
        }
        case OpKind::SumAll: {
            const Tensor& x = in_val(n, 0);
            double acc = 0.0;
            for (float xv : x.v) acc += xv;
            n.out.v[0] = static_cast<float>(acc);
            break;
        }
        case OpKind::SoftmaxCE: {
            const Tensor& z = in_val(n, 0);
            const int C = z.shape[0];
            if (n.ce_target < 0 || n.ce_target >= C) {
                throw std::invalid_argument("softmax_ce: target label not set or out of range");
            }
            double m = z.v[0];
            for (int i = 1; i < C; ++i) m = std::max(m, static_cast<double>(z.v[static_cast<size_t>(i)]));
            double denom = 0.0;
            for (int i = 0; i < C; ++i) denom += std::exp(static_cast<double>(z.v[static_cast<size_t>(i)]) - m);
            for (int i = 0; i < C; ++i) {
                n.aux_val[static_cast<size_t>(i)] =
                    static_cast<float>(std::exp(static_cast<double>(z.v[static_cast<size_t>(i)]) - m) / denom);
            }
            const double lse = m + std::log(denom);
            n.out.v[0] = static_cast<float>(lse - static_cast<double>(z.v[static_cast<size_t>(n.ce_target)]));
            break;
        }
    }
    if (check_all_finite_) check_finite(n.out, op_name(n.kind));
}

const Tensor& Graph::forward(int terminal) {
    check_id(terminal, "forward");
    for (int id = 0; id <= terminal; ++id) eval_node(id);
    forward_terminal_ = terminal;
    const Tensor& out = nodes_[static_cast<size_t>(terminal)].out;
    check_finite(out, "forward terminal");
    return out;
}

// --------------------------------------------------------------------------
// backward

namespace {

// Allocates/zeroes the gradient on first touch; returns false when the node
// opted out of gradients (frozen params, data inputs).
bool touch(Node& n) {
    if (!n.needs_grad) return false;
    if (!n.touched) {
        if (n.grad.shape != n.out.shape) {
            n.grad = Tensor(n.out.shape);
        } else {
            n.grad.zero();
        }
        n.touched = true;
    }
    return true;
}

}  // namespace

void Graph::backprop_node(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = n.grad;
    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param:
            break;
        case OpKind::Conv2d: {
            Node& xn = nodes_[static_cast<size_t>(n.in[0])];
            Node& wn = nodes_[static_cast<size_t>(n.in[1])];
            Node& bn = nodes_[static_cast<size_t>(n.in[2])];
            const bool want_dx = touch(xn);
            const bool want_dw = touch(wn);
            const bool want_db = touch(bn);
            if (!want_dx && !want_dw && !want_db) break;
            const Tensor& x = xn.out;
            const Tensor& w = wn.out;
            const int H = x.shape[0], W = x.shape[1], C = x.shape[2];
            const int KH = w.shape[0], KW = w.shape[1], OC = w.shape[3];
            const int OH = n.out.shape[0], OW = n.out.shape[1];
            const int s = n.stride, p = n.pad;
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    const float* gp = &g.v[(static_cast<size_t>(oy) * OW + ox) * OC];
                    if (want_db) {
                        for (int oc = 0; oc < OC; ++oc) bn.grad.v[static_cast<size_t>(oc)] += gp[oc];
                    }
                    for (int ky = 0; ky < KH; ++ky) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < KW; ++kx) {
                            const int ix = ox * s + kx - p;
                            if (ix < 0 || ix >= W) continue;
                            const size_t xbase = (static_cast<size_t>(iy) * W + ix) * C;
                            const size_t wbase = (static_cast<size_t>(ky) * KW + kx) * C * OC;
                            for (int ic = 0; ic < C; ++ic) {
                                const float* wrow = &w.v[wbase + static_cast<size_t>(ic) * OC];
                                if (want_dw) {
                                    const float a = x.v[xbase + static_cast<size_t>(ic)];
                                    float* dwrow = &wn.grad.v[wbase + static_cast<size_t>(ic) * OC];
                                    if (want_dx) {
                                        float s_dx = 0.0f;
                                        for (int oc = 0; oc < OC; ++oc) {
                                            s_dx += gp[oc] * wrow[oc];
                                            dwrow[oc] += a * gp[oc];
                                        }
                                        xn.grad.v[xbase + static_cast<size_t>(ic)] += s_dx;
                                    } else {
                                        for (int oc = 0; oc < OC; ++oc) dwrow[oc] += a * gp[oc];
                                    }
                                } else if (want_dx) {
                                    float s_dx = 0.0f;
                                    for (int oc = 0; oc < OC; ++oc) s_dx += gp[oc] * wrow[oc];
                                    xn.grad.v[xbase + static_cast<size_t>(ic)] += s_dx;
                                }
                            }
                        }
                    }
                }
            }
            break;
        }
        case OpKind::Relu: {
            Node& xn = nodes_[static_cast<size_t>(n.in[0])];
            if (!touch(xn)) break;
            for (size_t i = 0; i < g.v.size(); ++i) {
                if (xn.out.v[i] > 0.0f) xn.grad.v[i] += g.v[i];
            }
            break;
        }
        case OpKind::MaxPool: {
            Node& xn = nodes_[static_cast<size_t>(n.in[0])];
            if (!touch(xn)) break;
            for (size_t i = 0; i < g.v.size(); ++i) {
                xn.grad.v[static_cast<size_t>(n.aux_idx[i])] += g.v[i];
            }
            break;
        }
        case OpKind::Dense: {
            Node& xn = nodes_[static_cast<size_t>(n.in[0])];
            Node& wn = nodes_[static_cast<size_t>(n.in[1])];
            Node& bn = nodes_[static_cast<size_t>(n.in[2])];
            const bool want_dx = touch(xn);
            const bool want_dw = touch(wn);
            const bool want_db = touch(bn);
            const Tensor& x = xn.out;
            const Tensor& w = wn.out;
            const int N = x.shape[0], M = w.shape[1];
            if (want_db) {
                for (int j = 0; j < M; ++j) bn.grad.v[static_cast<size_t>(j)] += g.v[static_cast<size_t>(j)];
            }
            for (int i = 0; i < N; ++i) {
                const float* wrow = &w.v[static_cast<size_t>(i) * M];
                if (want_dx) {
                    float s_dx = 0.0f;
                    for (int j = 0; j < M; ++j) s_dx += g.v[static_cast<size_t>(j)] * wrow[j];
                    xn.grad.v[static_cast<size_t>(i)] += s_dx;
                }
                if (want_dw) {
                    const float a = x.v[static_cast<size_t>(i)];
                    float* dwrow = &wn.grad.v[static_cast<size_t>(i) * M];
                    for (int j = 0; j < M; ++j) dwrow[j] += a * g.v[static_cast<size_t>(j)];
                }
            }
            break;
        }
        case OpKind::Flatten: {
            Node& xn = nodes_[static_cast<size_t>(n.in[0])];
            if (!touch(xn)) break;
            for (size_t i = 0; i < g.v.size(); ++i) xn.grad.v[i] += g.v[i];
            break;
        }
        case OpKind::Add: {
            Node& an = nodes_[static_cast<size_t>(n.in[0])];
            Node& bn = nodes_[static_cast<size_t>(n.in[1])];
            if (touch(an)) {
                for (size_t i = 0; i < g.v.size(); ++i) an.grad.v[i] += g.v[i];
            }
            if (touch(bn)) {
                for (size_t i = 0; i < g.v.size(); ++i) bn.grad.v[i] += g.v[i];
            }
            break;
        }
        case OpKind::Scale: {
            Node& xn = nodes_[static_cast<size_t>(n.in[0])];
            if (!touch(xn)) break;
            for (size_t i = 0; i < g.v.size(); ++i) xn.grad.v[i] += n.scale_c * g.v[i];
            break;
        }
        case OpKind::Mul: {
            Node& an = nodes_[static_cast<size_t>(n.in[0])];
            Node& bn = nodes_[static_cast<size_t>(n.in[1])];
            if (touch(an)) {
                for (size_t i = 0; i < g.v.size(); ++i) an.grad.v[i] += g.v[i] * bn.out.v[i];
            }
            if (touch(bn)) {
                for (size_t i = 0; i < g.v.size(); ++i) bn.grad.v[i] += g.v[i] * an.out.v[i];
            }
            break;
        }
        case OpKind::SumAll: {
            Node& xn = nodes_[static_cast<size_t>(n.in[0])];
            if (!touch(xn)) break;
            const float gv = g.v[0];
            for (size_t i = 0; i < xn.grad.v.size(); ++i) xn.grad.v[i] += gv;
            break;
        }
        case OpKind::SoftmaxCE: {
            Node& zn = nodes_[static_cast<size_t>(n.in[0])];
            if (!touch(zn)) break;
            const float gv = g.v[0];
            const int C = zn.out.shape[0];
            for (int i = 0; i < C; ++i) {
                float d = n.aux_val[static_cast<size_t>(i)] - (i == n.ce_target ? 1.0f : 0.0f);
                zn.grad.v[static_cast<size_t>(i)] += gv * d;
            }
            break;
        }
    }
}

void Graph::backward(int loss_node) {
    check_id(loss_node, "backward");
    if (forward_terminal_ < loss_node) {
        throw std::logic_error("backward called before forward covering the loss node");
    }
    Node& loss = nodes_[static_cast<size_t>(loss_node)];
    if (loss.out.numel() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.out.shape));
    }
    for (int id = 0; id <= loss_node; ++id) nodes_[static_cast<size_t>(id)].touched = false;
    if (!touch(loss)) throw std::logic_error("backward: loss node excluded from gradients");
    loss.grad.v[0] = 1.0f;
    for (int id = loss_node; id >= 0; --id) {
        if (nodes_[static_cast<size_t>(id)].touched) backprop_node(id);
    }
}

}  // namespace advf
