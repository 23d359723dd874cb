#pragma once

#include <string>
#include <vector>

#include "advf/tensor.hpp"

namespace advf {

enum class OpKind {
    Input,
    Param,
    Conv2d,
    Relu,
    MaxPool,
    Dense,
    Flatten,
    Add,
    Scale,
    Mul,
    SumAll,
    SoftmaxCE,
};

const char* op_name(OpKind k);

struct Node {
    OpKind kind;
    std::vector<int> in;  // input node ids; always strictly less than this node's id
    Tensor out;
    Tensor grad;

    // op attributes
    int stride = 1;
    int pad = 0;
    int pool_k = 2;
    float scale_c = 1.0f;
    int ce_target = -1;

    std::string name;      // Input nodes
    int param_index = -1;  // Param nodes: index into the bound weight list
    bool needs_grad = true;

    // cached intermediates for backward
    std::vector<int> aux_idx;    // MaxPool argmax positions
    std::vector<float> aux_val;  // SoftmaxCE probabilities

    bool value_set = false;  // Input nodes: set_input was called
    bool touched = false;    // backward bookkeeping
};

// Reverse-mode tape over dense tensors. Nodes are appended in topological
// order; forward evaluates the prefix up to a terminal node and caches every
// activation, backward walks the tape in reverse accumulating gradients.
//
// Param nodes read from an externally owned weight list, so several Graph
// instances can share one read-only weight set across threads.
class Graph {
public:
    Graph() = default;
    explicit Graph(const std::vector<Tensor>* weights) : weights_(weights) {}

    void bind_weights(const std::vector<Tensor>* weights) { weights_ = weights; }

    // --- construction -----------------------------------------------------
    int input(const std::string& name, Shape shape);
    int param(int weight_index);
    int conv2d(int x, int w, int b, int stride, int pad);
    int relu(int x);
    int maxpool(int x, int k);
    int dense(int x, int w, int b);
    int flatten(int x);
    int add(int a, int b);
    int scale(int x, float c);
    int mul(int a, int b);
    int sum_all(int x);
    int softmax_ce(int logits, int target_label);

    // --- per-sample mutation ----------------------------------------------
    void set_input(const std::string& name, const Tensor& value);
    void set_input(int node, const Tensor& value);
    void set_ce_target(int node, int target_label);
    void set_param_needs_grad(bool enabled);
    void set_input_needs_grad(bool enabled);
    // When enabled, forward checks every node's output for NaN/Inf instead of
    // just the terminal. Off by default (hot training path).
    void set_check_all_finite(bool enabled) { check_all_finite_ = enabled; }

    // --- execution ----------------------------------------------------------
    // Evaluates nodes [0, terminal]; returns the terminal activation.
    const Tensor& forward(int terminal);
    // Seeds d(loss)/d(loss) = 1 and accumulates gradients for every node the
    // loss depends on. Requires a prior forward covering loss_node; the loss
    // must be scalar.
    void backward(int loss_node);

    const Tensor& value(int node) const;
    const Tensor& grad(int node) const;
    // Hash of the piecewise-linear regime of the last forward pass (relu sign
    // pattern and maxpool argmax choices); finite-difference checks use it to
    // detect probe intervals that cross a kink.
    uint64_t regime_signature() const;
    int size() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    int find_input(const std::string& name) const;

private:
    int push(Node n);
    void eval_node(int id);
    void backprop_node(int id);
    const Tensor& in_val(const Node& n, int slot) const {
        return nodes_[static_cast<size_t>(n.in[static_cast<size_t>(slot)])].out;
    }
    void check_id(int id, const char* where) const;

    std::vector<Node> nodes_;
    const std::vector<Tensor>* weights_ = nullptr;
    int forward_terminal_ = -1;  // highest node evaluated by the last forward
    bool check_all_finite_ = false;
};

}  // namespace advf
