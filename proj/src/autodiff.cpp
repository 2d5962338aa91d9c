#include "rdl/autodiff.hpp"

#include <atomic>
#include <cmath>

#include "rdl/errors.hpp"

namespace rdl::autodiff {

namespace {

std::atomic<std::uint64_t> next_param_id{1};

std::vector<int> strides_of(const std::vector<int>& shape) {
    std::vector<int> strides(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        strides[static_cast<std::size_t>(i)] =
            strides[static_cast<std::size_t>(i + 1)] * shape[static_cast<std::size_t>(i + 1)];
    }
    return strides;
}

} // namespace

Parameter::Parameter(std::string name_, Tensor value_, manifold::ManifoldDescriptor descriptor_)
    : name(std::move(name_)),
      value(std::move(value_)),
      descriptor(std::move(descriptor_)),
      id(next_param_id.fetch_add(1)) {
    if (!manifold::is_point(descriptor, value, 1e-8)) {
        throw InvalidInitialValue("parameter '" + name + "': value is not on " +
                                  descriptor.to_string() + " at tolerance 1e-8");
    }
}

void Parameter::set_value(const Tensor& v) {
    if (!manifold::is_point(descriptor, v, 1e-8)) {
        throw InvalidInitialValue("parameter '" + name + "': value is not on " +
                                  descriptor.to_string() + " at tolerance 1e-8");
    }
    value = v;
}

void Parameter::accumulate_egrad(const Tensor& g) {
    if (!g.same_shape(value)) {
        throw ShapeMismatch("parameter '" + name + "': gradient shape " +
                            shape_to_string(g.shape()) + " vs value " +
                            shape_to_string(value.shape()));
    }
    if (!egrad) {
        egrad = g;
    } else {
        for (int i = 0; i < g.size(); ++i) (*egrad)[i] += g[i];
    }
}

void zero_grad(const std::vector<ParamPtr>& params) {
    for (const auto& p : params) {
        p->egrad.reset();
        p->rgrad.reset();
    }
}

void Conv2dGeometry::validate() const {
    if (in_channels < 1 || height < 1 || width < 1 || kernel_h < 1 || kernel_w < 1) {
        throw InvalidGeometry("im2col: channels, spatial dims and kernel must be >= 1");
    }
    if (stride < 1 || padding < 0) {
        throw InvalidGeometry("im2col: stride must be >= 1 and padding >= 0");
    }
    const int eh = height + 2 * padding - kernel_h;
    const int ew = width + 2 * padding - kernel_w;
    if (eh < 0 || ew < 0 || eh % stride != 0 || ew % stride != 0) {
        throw InvalidGeometry("im2col: output size is not integral and positive for input " +
                              std::to_string(height) + "x" + std::to_string(width) + ", kernel " +
                              std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                              ", stride " + std::to_string(stride) + ", padding " +
                              std::to_string(padding));
    }
}

Graph::NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    forward_done_ = false;
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Graph::Node& Graph::node(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
        throw Error("graph: node id " + std::to_string(id) + " out of range");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

Graph::NodeId Graph::input(const std::string& name, std::vector<int> shape) {
    for (const auto& n : nodes_) {
        if (n.kind == Node::Kind::input && n.name == name) {
            throw Error("graph: duplicate input name '" + name + "'");
        }
    }
    Node n;
    n.kind = Node::Kind::input;
    n.name = name;
    n.shape = Tensor(shape).shape(); // validates the shape
    return push(std::move(n));
}

Graph::NodeId Graph::parameter(const ParamPtr& p) {
    if (!p) throw Error("graph: null parameter");
    Node n;
    n.kind = Node::Kind::parameter;
    n.param = p;
    n.shape = p->value.shape();
    bool seen = false;
    for (const auto& q : params_) seen = seen || q->id == p->id;
    if (!seen) params_.push_back(p);
    return push(std::move(n));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b, bool ta, bool tb) {
    const auto& na = node(a);
    const auto& nb = node(b);
    Node n;
    n.op = OpKind::matmul;
    n.inputs = {a, b};
    n.transpose_a = ta;
    n.transpose_b = tb;
    if (na.shape.size() == 2 && nb.shape.size() == 3) {
        if (ta || tb) throw ShapeMismatch("matmul: transpose flags are not supported in batched form");
        if (na.shape[1] != nb.shape[1]) {
            throw ShapeMismatch("matmul: inner dimensions " + std::to_string(na.shape[1]) +
                                " vs " + std::to_string(nb.shape[1]));
        }
        n.batched = true;
        n.shape = {nb.shape[0], na.shape[0], nb.shape[2]};
    } else if (na.shape.size() == 2 && nb.shape.size() == 2) {
        const int m = ta ? na.shape[1] : na.shape[0];
        const int ka = ta ? na.shape[0] : na.shape[1];
        const int kb = tb ? nb.shape[1] : nb.shape[0];
        const int nn = tb ? nb.shape[0] : nb.shape[1];
        if (ka != kb) {
            throw ShapeMismatch("matmul: inner dimensions " + std::to_string(ka) + " vs " +
                                std::to_string(kb));
        }
        n.shape = {m, nn};
    } else {
        throw ShapeMismatch("matmul: unsupported operand ranks " + shape_to_string(na.shape) +
                            " and " + shape_to_string(nb.shape));
    }
    return push(std::move(n));
}

Graph::NodeId Graph::add_bias(NodeId x, NodeId bias, int axis) {
    const auto& nx = node(x);
    const auto& nb = node(bias);
    if (nb.shape.size() != 1) {
        throw ShapeMismatch("add_bias: bias must be rank 1, got " + shape_to_string(nb.shape));
    }
    if (axis < 0 || axis >= static_cast<int>(nx.shape.size())) {
        throw ShapeMismatch("add_bias: axis " + std::to_string(axis) + " out of range for " +
                            shape_to_string(nx.shape));
    }
    if (nx.shape[static_cast<std::size_t>(axis)] != nb.shape[0]) {
        throw ShapeMismatch("add_bias: bias length " + std::to_string(nb.shape[0]) +
                            " vs axis size " +
                            std::to_string(nx.shape[static_cast<std::size_t>(axis)]));
    }
    Node n;
    n.op = OpKind::add_bias;
    n.inputs = {x, bias};
    n.bias_axis = axis;
    n.shape = nx.shape;
    return push(std::move(n));
}

Graph::NodeId Graph::relu(NodeId x) {
    Node n;
    n.op = OpKind::relu;
    n.inputs = {x};
    n.shape = node(x).shape;
    return push(std::move(n));
}

Graph::NodeId Graph::log_softmax_rows(NodeId x) {
    const auto& nx = node(x);
    if (nx.shape.size() != 2) {
        throw ShapeMismatch("log_softmax_rows: expected rank 2, got " + shape_to_string(nx.shape));
    }
    Node n;
    n.op = OpKind::log_softmax_rows;
    n.inputs = {x};
    n.shape = nx.shape;
    return push(std::move(n));
}

Graph::NodeId Graph::nll_loss_mean(NodeId log_probs, std::vector<int> targets) {
    const auto& nx = node(log_probs);
    if (nx.shape.size() != 2) {
        throw ShapeMismatch("nll_loss_mean: expected rank 2, got " + shape_to_string(nx.shape));
    }
    if (static_cast<int>(targets.size()) != nx.shape[0]) {
        throw ShapeMismatch("nll_loss_mean: " + std::to_string(targets.size()) +
                            " targets for batch " + std::to_string(nx.shape[0]));
    }
    for (int t : targets) {
        if (t < 0 || t >= nx.shape[1]) {
            throw ShapeMismatch("nll_loss_mean: target class " + std::to_string(t) +
                                " out of range [0, " + std::to_string(nx.shape[1]) + ")");
        }
    }
    Node n;
    n.op = OpKind::nll_loss_mean;
    n.inputs = {log_probs};
    n.targets = std::move(targets);
    n.shape = {1};
    return push(std::move(n));
}

Graph::NodeId Graph::reshape(NodeId x, std::vector<int> shape) {
    const auto& nx = node(x);
    Tensor probe(shape); // validates
    if (probe.size() != shape_product(nx.shape)) {
        throw ShapeMismatch("reshape: " + shape_to_string(nx.shape) + " -> " +
                            shape_to_string(shape) + " changes element count");
    }
    Node n;
    n.op = OpKind::reshape;
    n.inputs = {x};
    n.shape = std::move(shape);
    return push(std::move(n));
}

Graph::NodeId Graph::im2col(NodeId x, const Conv2dGeometry& geom) {
    geom.validate();
    const auto& nx = node(x);
    std::vector<int> expected = {nx.shape.empty() ? 0 : nx.shape[0], geom.in_channels, geom.height,
                                 geom.width};
    if (nx.shape.size() != 4 || nx.shape[1] != geom.in_channels || nx.shape[2] != geom.height ||
        nx.shape[3] != geom.width) {
        throw ShapeMismatch("im2col: input " + shape_to_string(nx.shape) +
                            " does not match geometry " + shape_to_string(expected));
    }
    Node n;
    n.op = OpKind::im2col;
    n.inputs = {x};
    n.geom = geom;
    n.shape = {nx.shape[0], geom.in_channels * geom.kernel_h * geom.kernel_w,
               geom.out_h() * geom.out_w()};
    return push(std::move(n));
}

Graph::NodeId Graph::scale(NodeId x, double factor) {
    Node n;
    n.op = OpKind::scale;
    n.inputs = {x};
    n.factor = factor;
    n.shape = node(x).shape;
    return push(std::move(n));
}

Graph::NodeId Graph::sum(NodeId x) {
    Node n;
    n.op = OpKind::sum;
    n.inputs = {x};
    node(x);
    n.shape = {1};
    return push(std::move(n));
}

const Tensor& Graph::forward(const std::map<std::string, Tensor>& inputs) {
    if (nodes_.empty()) throw Error("graph: forward on empty graph");

    // Bind and shape-check every leaf before touching any data.
    for (auto& n : nodes_) {
        if (n.kind == Node::Kind::input) {
            auto it = inputs.find(n.name);
            if (it == inputs.end()) throw UnboundInput("forward: input '" + n.name + "' not bound");
            if (it->second.shape() != n.shape) {
                throw ShapeMismatch("forward: input '" + n.name + "' has shape " +
                                    shape_to_string(it->second.shape()) + ", declared " +
                                    shape_to_string(n.shape));
            }
        } else if (n.kind == Node::Kind::parameter) {
            if (n.param->value.shape() != n.shape) {
                throw ShapeMismatch("forward: parameter '" + n.param->name +
                                    "' changed shape since graph construction");
            }
        }
    }

    for (auto& n : nodes_) {
        switch (n.kind) {
            case Node::Kind::input: n.out = inputs.at(n.name); break;
            case Node::Kind::parameter: n.out = n.param->value; break;
            case Node::Kind::op: eval(n); break;
        }
    }
    forward_done_ = true;
    return nodes_.back().out;
}

void Graph::eval(Node& n) {
    auto in = [&](int i) -> const Tensor& {
        return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(i)])].out;
    };
    switch (n.op) {
        case OpKind::matmul:
            n.out = n.batched ? matmul_batched(in(0), in(1))
                              : rdl::matmul(in(0), in(1), n.transpose_a, n.transpose_b);
            break;
        case OpKind::add_bias: {
            const Tensor& x = in(0);
            const Tensor& b = in(1);
            Tensor out = x;
            const auto strides = strides_of(n.shape);
            const int axis_stride = strides[static_cast<std::size_t>(n.bias_axis)];
            const int axis_size = n.shape[static_cast<std::size_t>(n.bias_axis)];
            for (int i = 0; i < out.size(); ++i) {
                out[i] += b[(i / axis_stride) % axis_size];
            }
            n.out = std::move(out);
            break;
        }
        case OpKind::relu: {
            Tensor out = in(0);
            for (int i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
            n.out = std::move(out);
            break;
        }
        case OpKind::log_softmax_rows: {
            const Tensor& x = in(0);
            const int rows = x.rows(), cols = x.cols();
            Tensor out({rows, cols});
            for (int i = 0; i < rows; ++i) {
                double m = x(i, 0);
                for (int j = 1; j < cols; ++j) m = std::max(m, x(i, j));
                double z = 0.0;
                for (int j = 0; j < cols; ++j) z += std::exp(x(i, j) - m);
                const double lz = m + std::log(z);
                for (int j = 0; j < cols; ++j) out(i, j) = x(i, j) - lz;
            }
            n.out = std::move(out);
            break;
        }
        case OpKind::nll_loss_mean: {
            const Tensor& lp = in(0);
            const int batch = lp.rows();
            double loss = 0.0;
            for (int b = 0; b < batch; ++b) {
                loss -= lp(b, n.targets[static_cast<std::size_t>(b)]);
            }
            n.out = Tensor({1}, {loss / batch});
            break;
        }
        case OpKind::reshape:
            n.out = reshaped(in(0), n.shape);
            break;
        case OpKind::im2col: {
            const Tensor& x = in(0);
            const Conv2dGeometry& g = n.geom;
            const int batch = x.dim(0), oh = g.out_h(), ow = g.out_w();
            Tensor out(n.shape);
            for (int b = 0; b < batch; ++b)
                for (int c = 0; c < g.in_channels; ++c)
                    for (int ki = 0; ki < g.kernel_h; ++ki)
                        for (int kj = 0; kj < g.kernel_w; ++kj) {
                            const int row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                            for (int i = 0; i < oh; ++i) {
                                const int si = i * g.stride - g.padding + ki;
                                for (int j = 0; j < ow; ++j) {
                                    const int sj = j * g.stride - g.padding + kj;
                                    double v = 0.0;
                                    if (si >= 0 && si < g.height && sj >= 0 && sj < g.width) {
                                        v = x[((b * g.in_channels + c) * g.height + si) * g.width +
                                              sj];
                                    }
                                    out(b, row, i * ow + j) = v;
                                }
                            }
                        }
            n.out = std::move(out);
            break;
        }
        case OpKind::scale:
            n.out = scaled(in(0), n.factor);
            break;
        case OpKind::sum: {
            double s = 0.0;
            const Tensor& x = in(0);
            for (int i = 0; i < x.size(); ++i) s += x[i];
            n.out = Tensor({1}, {s});
            break;
        }
    }
}

void Graph::backward() {
    if (!forward_done_) throw BackwardBeforeForward("backward: run forward first");
    Node& last = nodes_.back();
    if (last.shape != std::vector<int>{1}) {
        throw NonScalarOutput("backward: final node has shape " + shape_to_string(last.shape) +
                              ", expected [1]");
    }
    for (auto& n : nodes_) n.grad = Tensor(n.shape);
    last.grad[0] = 1.0;

    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = *it;
        if (n.kind == Node::Kind::parameter) {
            n.param->accumulate_egrad(n.grad);
        } else if (n.kind == Node::Kind::op) {
            propagate(n);
        }
    }
}

void Graph::propagate(Node& n) {
    auto in_node = [&](int i) -> Node& {
        return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(i)])];
    };
    switch (n.op) {
        case OpKind::matmul: {
            Node& a = in_node(0);
            Node& b = in_node(1);
            if (n.batched) {
                // out[k] = A * B[k]
                const int batch = n.shape[0], m = n.shape[1], nn = n.shape[2];
                const int kk = a.shape[1];
                for (int bt = 0; bt < batch; ++bt)
                    for (int i = 0; i < m; ++i)
                        for (int k = 0; k < kk; ++k) {
                            double s = 0.0;
                            for (int j = 0; j < nn; ++j) s += n.grad(bt, i, j) * b.out(bt, k, j);
                            a.grad(i, k) += s;
                        }
                for (int bt = 0; bt < batch; ++bt)
                    for (int k = 0; k < kk; ++k)
                        for (int j = 0; j < nn; ++j) {
                            double s = 0.0;
                            for (int i = 0; i < m; ++i) s += a.out(i, k) * n.grad(bt, i, j);
                            b.grad(bt, k, j) += s;
                        }
            } else {
                // Differentiate through out = op_a(A) op_b(B).
                Tensor aop = n.transpose_a ? transpose(a.out) : a.out;
                Tensor bop = n.transpose_b ? transpose(b.out) : b.out;
                Tensor da = rdl::matmul(n.grad, bop, false, true);
                Tensor db = rdl::matmul(aop, n.grad, true, false);
                if (n.transpose_a) da = transpose(da);
                if (n.transpose_b) db = transpose(db);
                a.grad = add(a.grad, da);
                b.grad = add(b.grad, db);
            }
            break;
        }
        case OpKind::add_bias: {
            Node& x = in_node(0);
            Node& b = in_node(1);
            const auto strides = strides_of(n.shape);
            const int axis_stride = strides[static_cast<std::size_t>(n.bias_axis)];
            const int axis_size = n.shape[static_cast<std::size_t>(n.bias_axis)];
            for (int i = 0; i < n.grad.size(); ++i) {
                x.grad[i] += n.grad[i];
                b.grad[(i / axis_stride) % axis_size] += n.grad[i];
            }
            break;
        }
        case OpKind::relu: {
            Node& x = in_node(0);
            for (int i = 0; i < n.grad.size(); ++i) {
                if (x.out[i] > 0.0) x.grad[i] += n.grad[i];
            }
            break;
        }
        case OpKind::log_softmax_rows: {
            Node& x = in_node(0);
            const int rows = n.shape[0], cols = n.shape[1];
            for (int i = 0; i < rows; ++i) {
                double gsum = 0.0;
                for (int j = 0; j < cols; ++j) gsum += n.grad(i, j);
                for (int j = 0; j < cols; ++j) {
                    x.grad(i, j) += n.grad(i, j) - std::exp(n.out(i, j)) * gsum;
                }
            }
            break;
        }
        case OpKind::nll_loss_mean: {
            Node& x = in_node(0);
            const int batch = x.shape[0];
            const double g = n.grad[0] / batch;
            for (int b = 0; b < batch; ++b) {
                x.grad(b, n.targets[static_cast<std::size_t>(b)]) -= g;
            }
            break;
        }
        case OpKind::reshape: {
            Node& x = in_node(0);
            for (int i = 0; i < n.grad.size(); ++i) x.grad[i] += n.grad[i];
            break;
        }
        case OpKind::im2col: {
            Node& x = in_node(0);
            const Conv2dGeometry& g = n.geom;
            const int batch = n.shape[0], oh = g.out_h(), ow = g.out_w();
            for (int b = 0; b < batch; ++b)
                for (int c = 0; c < g.in_channels; ++c)
                    for (int ki = 0; ki < g.kernel_h; ++ki)
                        for (int kj = 0; kj < g.kernel_w; ++kj) {
                            const int row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                            for (int i = 0; i < oh; ++i) {
                                const int si = i * g.stride - g.padding + ki;
                                if (si < 0 || si >= g.height) continue;
                                for (int j = 0; j < ow; ++j) {
                                    const int sj = j * g.stride - g.padding + kj;
                                    if (sj < 0 || sj >= g.width) continue;
                                    x.grad[((b * g.in_channels + c) * g.height + si) * g.width +
                                           sj] += n.grad(b, row, i * ow + j);
                                }
                            }
                        }
            break;
        }
        case OpKind::scale: {
            Node& x = in_node(0);
            for (int i = 0; i < n.grad.size(); ++i) x.grad[i] += n.factor * n.grad[i];
            break;
        }
        case OpKind::sum: {
            Node& x = in_node(0);
            for (int i = 0; i < x.grad.size(); ++i) x.grad[i] += n.grad[0];
            break;
        }
    }
}

const Tensor& Graph::output(NodeId id) const {
    const Node& n = node(id);
    if (!forward_done_) throw BackwardBeforeForward("output: run forward first");
    return n.out;
}

const std::vector<int>& Graph::node_shape(NodeId id) const { return node(id).shape; }

double grad_check(Graph& graph, const std::map<std::string, Tensor>& inputs, const ParamPtr& p,
                  double h) {
    if (!(h >= 1e-8 && h <= 1e-4)) {
        throw Error("grad_check: step " + format_double(h) + " outside [1e-8, 1e-4]");
    }
    auto saved_egrad = p->egrad;
    p->egrad.reset();
    graph.forward(inputs);
    graph.backward();
    const Tensor analytic = *p->egrad;
    p->egrad = saved_egrad;

    double worst = 0.0;
    for (int i = 0; i < p->value.size(); ++i) {
        const double v = p->value[i];
        p->value[i] = v + h;
        const double fp = graph.forward(inputs)[0];
        p->value[i] = v - h;
        const double fm = graph.forward(inputs)[0];
        p->value[i] = v;
        const double central = (fp - fm) / (2.0 * h);
        const double err = std::fabs(analytic[i] - central) / std::max(1.0, std::fabs(central));
        worst = std::max(worst, err);
    }
    graph.forward(inputs); // leave the tape consistent with the true value
    return worst;
}

} // namespace rdl::autodiff
