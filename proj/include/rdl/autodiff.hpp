#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rdl/manifold.hpp"
#include "rdl/tensor.hpp"

namespace rdl::autodiff {

// A trainable tensor bound to a manifold. `egrad` is the accumulated
// back-propagated (Euclidean) gradient; `rgrad` is the Riemannian gradient
// the optimizer derives from it. Both are absent until produced.
struct Parameter {
    std::string name;
    Tensor value;
    manifold::ManifoldDescriptor descriptor;
    std::optional<Tensor> egrad;
    std::optional<Tensor> rgrad;
    std::uint64_t id;

    // Validates membership of `value` at tolerance 1e-8; throws
    // InvalidInitialValue otherwise.
    Parameter(std::string name, Tensor value, manifold::ManifoldDescriptor descriptor);

    // Same membership validation as the constructor.
    void set_value(const Tensor& v);

    void accumulate_egrad(const Tensor& g);
};

using ParamPtr = std::shared_ptr<Parameter>;

// Clears egrad and rgrad on every parameter. Idempotent.
void zero_grad(const std::vector<ParamPtr>& params);

// The primitive operations every layer lowers to.
enum class OpKind {
    matmul,
    add_bias,
    relu,
    log_softmax_rows,
    nll_loss_mean,
    reshape,
    im2col,
    scale,
    sum
};

struct Conv2dGeometry {
    int in_channels = 1;
    int height = 1;
    int width = 1;
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int padding = 0;

    int out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
    int out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }

    // Throws InvalidGeometry unless the output size is integral and >= 1.
    void validate() const;
};

// Reverse-mode tape. Nodes are appended in topological order with total
// shape inference: malformed graphs are rejected at construction, before
// any numeric work. The tape is intended to be rebuilt per forward pass
// (dynamic graph); forward() may also be re-run on the same tape with new
// bindings, recomputing every node.
class Graph {
public:
    using NodeId = int;

    // Leaves.
    NodeId input(const std::string& name, std::vector<int> shape);
    NodeId parameter(const ParamPtr& p);

    // Operations. matmul takes optional logical transpose flags on rank-2
    // operands; a rank-3 rhs selects the batched form out[b] = a * rhs[b]
    // (no flags).
    NodeId matmul(NodeId a, NodeId b, bool ta = false, bool tb = false);
    NodeId add_bias(NodeId x, NodeId bias, int axis);
    NodeId relu(NodeId x);
    NodeId log_softmax_rows(NodeId x);
    NodeId nll_loss_mean(NodeId log_probs, std::vector<int> targets);
    NodeId reshape(NodeId x, std::vector<int> shape);
    NodeId im2col(NodeId x, const Conv2dGeometry& geom);
    NodeId scale(NodeId x, double factor);
    NodeId sum(NodeId x);

    // Evaluates every node in order and returns the final node's output.
    // All intermediate outputs stay on the tape for backward().
    const Tensor& forward(const std::map<std::string, Tensor>& inputs);

    // Accumulates d(output)/d(param) into every parameter's egrad. The
    // final node must be scalar (shape [1]).
    void backward();

    const Tensor& output(NodeId id) const;
    const std::vector<int>& node_shape(NodeId id) const;
    const std::vector<ParamPtr>& parameters() const { return params_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        enum class Kind { input, parameter, op };
        Kind kind = Kind::op;
        OpKind op = OpKind::sum;
        std::vector<NodeId> inputs;
        std::vector<int> shape;
        // static attributes
        bool transpose_a = false;
        bool transpose_b = false;
        bool batched = false;
        int bias_axis = 0;
        double factor = 1.0;
        Conv2dGeometry geom;
        std::vector<int> targets;
        ParamPtr param;
        std::string name;
        // per-pass values
        Tensor out;
        Tensor grad;
    };

    NodeId push(Node n);
    const Node& node(NodeId id) const;
    void eval(Node& n);
    void propagate(Node& n);

    std::vector<Node> nodes_;
    std::vector<ParamPtr> params_;
    bool forward_done_ = false;
};

// Max over parameter entries of
// |egrad_i - central_diff_i| / max(1, |central_diff_i|), with central
// differences of the graph output at step h in [1e-8, 1e-4]. Runs a fresh
// forward/backward; leaves the parameter value unchanged.
double grad_check(Graph& graph, const std::map<std::string, Tensor>& inputs, const ParamPtr& p,
                  double h);

} // namespace rdl::autodiff
