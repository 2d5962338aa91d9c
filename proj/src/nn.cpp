#include "rdl/nn.hpp"

#include <cmath>

#include "rdl/errors.hpp"

namespace rdl::nn {

using manifold::ManifoldDescriptor;

ManifoldRequest manifold_request_from_string(const std::string& s) {
    if (s == "none") return ManifoldRequest::none;
    if (s == "stiefel") return ManifoldRequest::stiefel;
    if (s == "positive_definite") return ManifoldRequest::positive_definite;
    throw ParseError("unknown manifold request '" + s + "'");
}

std::string to_string(ManifoldRequest r) {
    switch (r) {
        case ManifoldRequest::none: return "none";
        case ManifoldRequest::stiefel: return "stiefel";
        case ManifoldRequest::positive_definite: return "positive_definite";
    }
    return "?";
}

ManifoldDescriptor manifold_for_shape(ManifoldRequest request, int rows, int cols) {
    if (rows < 1 || cols < 1) {
        throw DegenerateShape("manifold_for_shape: degenerate shape " + std::to_string(rows) +
                              " x " + std::to_string(cols));
    }
    switch (request) {
        case ManifoldRequest::none:
            return ManifoldDescriptor::euclidean({rows, cols});
        case ManifoldRequest::stiefel:
            // n >= p is the Stiefel existence condition; store transposed
            // when the tensor is wider than tall.
            return ManifoldDescriptor::stiefel(std::max(rows, cols), std::min(rows, cols),
                                               /*transposed=*/rows < cols);
        case ManifoldRequest::positive_definite:
            if (rows != cols) {
                throw IncompatibleShape("manifold_for_shape: positive_definite needs a square "
                                        "shape, got " +
                                        std::to_string(rows) + " x " + std::to_string(cols));
            }
            return ManifoldDescriptor::positive_definite(rows);
    }
    throw Error("manifold_for_shape: unreachable");
}

namespace {

Tensor initial_weight(const ManifoldDescriptor& desc, int fan_in, Rng& rng) {
    if (desc.is_euclidean()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        return Tensor::uniform(desc.value_shape(), -bound, bound, rng);
    }
    return manifold::rand(desc, rng);
}

Tensor initial_bias(int out, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform({out}, -bound, bound, rng);
}

} // namespace

Linear::Linear(int in_features, int out_features, ManifoldRequest request, bool with_bias,
               Rng& rng, const std::string& name)
    : in_features_(in_features), out_features_(out_features), request_(request) {
    ManifoldDescriptor desc = manifold_for_shape(request, out_features, in_features);
    weight_ = std::make_shared<autodiff::Parameter>(name + ".weight",
                                                    initial_weight(desc, in_features, rng), desc);
    if (with_bias) {
        bias_ = std::make_shared<autodiff::Parameter>(
            name + ".bias", initial_bias(out_features, in_features, rng),
            ManifoldDescriptor::euclidean({out_features}));
    }
}

void Linear::init_weight(Rng& rng) {
    weight_->set_value(initial_weight(weight_->descriptor, in_features_, rng));
    if (bias_) bias_->set_value(initial_bias(out_features_, in_features_, rng));
}

void Linear::set_weight(const Tensor& w) {
    if (w.shape() != weight_->value.shape()) {
        throw InvalidInitialValue("linear set_weight: shape " + shape_to_string(w.shape()) +
                                  ", expected " + shape_to_string(weight_->value.shape()));
    }
    weight_->set_value(w);
}

Graph::NodeId Linear::apply(Graph& g, Graph::NodeId x) const {
    auto w = g.parameter(weight_);
    auto h = g.matmul(x, w, false, true); // y = x W^T
    if (bias_) h = g.add_bias(h, g.parameter(bias_), 1);
    return h;
}

std::vector<ParamPtr> Linear::parameters() const {
    std::vector<ParamPtr> out{weight_};
    if (bias_) out.push_back(bias_);
    return out;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride,
               int padding, ManifoldRequest request, bool with_bias, Rng& rng,
               const std::string& name)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      stride_(stride),
      padding_(padding),
      request_(request) {
    if (in_channels < 1 || out_channels < 1 || kernel_h < 1 || kernel_w < 1 || stride < 1 ||
        padding < 0) {
        throw InvalidGeometry("conv2d: channels and kernel must be >= 1, stride >= 1, padding >= 0");
    }
    const int patch = in_channels * kernel_h * kernel_w;
    ManifoldDescriptor desc = manifold_for_shape(request, out_channels, patch);
    weight_ = std::make_shared<autodiff::Parameter>(name + ".weight",
                                                    initial_weight(desc, patch, rng), desc);
    if (with_bias) {
        bias_ = std::make_shared<autodiff::Parameter>(name + ".bias",
                                                      initial_bias(out_channels, patch, rng),
                                                      ManifoldDescriptor::euclidean({out_channels}));
    }
}

void Conv2d::init_weight(Rng& rng) {
    const int patch = in_channels_ * kernel_h_ * kernel_w_;
    weight_->set_value(initial_weight(weight_->descriptor, patch, rng));
    if (bias_) bias_->set_value(initial_bias(out_channels_, patch, rng));
}

void Conv2d::set_weight(const Tensor& w) {
    const int patch = in_channels_ * kernel_h_ * kernel_w_;
    const std::vector<int> logical{out_channels_, in_channels_, kernel_h_, kernel_w_};
    const std::vector<int> matricized{out_channels_, patch};
    if (w.shape() != logical && w.shape() != matricized) {
        throw InvalidInitialValue("conv2d set_weight: shape " + shape_to_string(w.shape()) +
                                  ", expected " + shape_to_string(logical) + " or " +
                                  shape_to_string(matricized));
    }
    weight_->set_value(w.shape() == matricized ? w : reshaped(w, matricized));
}

Graph::NodeId Conv2d::apply(Graph& g, Graph::NodeId x) const {
    // Copy: adding nodes below may reallocate the graph's node storage.
    const std::vector<int> in_shape = g.node_shape(x);
    if (in_shape.size() != 4) {
        throw ShapeMismatch("conv2d: expected rank-4 input, got " + shape_to_string(in_shape));
    }
    autodiff::Conv2dGeometry geom;
    geom.in_channels = in_channels_;
    geom.height = in_shape[2];
    geom.width = in_shape[3];
    geom.kernel_h = kernel_h_;
    geom.kernel_w = kernel_w_;
    geom.stride = stride_;
    geom.padding = padding_;
    geom.validate();

    auto col = g.im2col(x, geom);               // (B, patch, oh*ow)
    auto w = g.parameter(weight_);              // (out_ch, patch)
    auto h = g.matmul(w, col);                  // (B, out_ch, oh*ow)
    if (bias_) h = g.add_bias(h, g.parameter(bias_), 1);
    return g.reshape(h, {in_shape[0], out_channels_, geom.out_h(), geom.out_w()});
}

std::vector<ParamPtr> Conv2d::parameters() const {
    std::vector<ParamPtr> out{weight_};
    if (bias_) out.push_back(bias_);
    return out;
}

void Sequential::check_not_aliased(const void* layer) const {
    for (const auto& item : items_) {
        const void* existing = nullptr;
        if (auto* l = std::get_if<std::shared_ptr<Linear>>(&item)) existing = l->get();
        if (auto* c = std::get_if<std::shared_ptr<Conv2d>>(&item)) existing = c->get();
        if (existing == layer) {
            throw Error("sequential: layer instance added twice (parameters must not alias)");
        }
    }
}

void Sequential::add(std::shared_ptr<Linear> layer) {
    if (!layer) throw Error("sequential: null layer");
    check_not_aliased(layer.get());
    items_.emplace_back(std::move(layer));
}

void Sequential::add(std::shared_ptr<Conv2d> layer) {
    if (!layer) throw Error("sequential: null layer");
    check_not_aliased(layer.get());
    items_.emplace_back(std::move(layer));
}

Graph::NodeId Sequential::apply(Graph& g, Graph::NodeId x) const {
    Graph::NodeId h = x;
    for (const auto& item : items_) {
        if (auto* l = std::get_if<std::shared_ptr<Linear>>(&item)) {
            h = (*l)->apply(g, h);
        } else if (auto* c = std::get_if<std::shared_ptr<Conv2d>>(&item)) {
            h = (*c)->apply(g, h);
        } else if (std::holds_alternative<ReLU>(item)) {
            h = g.relu(h);
        } else {
            h = g.log_softmax_rows(h);
        }
    }
    return h;
}

std::vector<ParamPtr> Sequential::parameters() const {
    std::vector<ParamPtr> out;
    for (const auto& item : items_) {
        std::vector<ParamPtr> ps;
        if (auto* l = std::get_if<std::shared_ptr<Linear>>(&item)) ps = (*l)->parameters();
        if (auto* c = std::get_if<std::shared_ptr<Conv2d>>(&item)) ps = (*c)->parameters();
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

} // namespace rdl::nn
