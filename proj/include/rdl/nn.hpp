#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "rdl/autodiff.hpp"
#include "rdl/manifold.hpp"
#include "rdl/rng.hpp"

namespace rdl::nn {

using autodiff::Graph;
using autodiff::ParamPtr;

enum class ManifoldRequest { none, stiefel, positive_definite };

ManifoldRequest manifold_request_from_string(const std::string& s);
std::string to_string(ManifoldRequest r);

// Maps a (rows, cols) weight shape to a descriptor that satisfies the
// manifold's initialization conditions. A Stiefel request on rows < cols
// returns the transposed descriptor so n >= p always holds; a
// PositiveDefinite request requires a square shape.
manifold::ManifoldDescriptor manifold_for_shape(ManifoldRequest request, int rows, int cols);

// Fully connected layer, weight stored out x in, y = x W^T + bias.
class Linear {
public:
    Linear(int in_features, int out_features, ManifoldRequest request, bool with_bias, Rng& rng,
           const std::string& name = "linear");

    // Re-randomizes weight (and bias) per the layer's manifold.
    void init_weight(Rng& rng);
    // User-provided weight; must satisfy is_point at 1e-8.
    void set_weight(const Tensor& w);

    Graph::NodeId apply(Graph& g, Graph::NodeId x) const;

    int in_features() const { return in_features_; }
    int out_features() const { return out_features_; }
    const ParamPtr& weight() const { return weight_; }
    const ParamPtr& bias() const { return bias_; } // null when bias-less
    std::vector<ParamPtr> parameters() const;

private:
    int in_features_;
    int out_features_;
    ManifoldRequest request_;
    ParamPtr weight_;
    ParamPtr bias_;
};

// 2-D convolution (cross-correlation), weight stored as the matricized
// (out_channels) x (in_channels * kernel_h * kernel_w) matrix, kw fastest.
// The manifold constraint applies to that matrix.
class Conv2d {
public:
    Conv2d(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride, int padding,
           ManifoldRequest request, bool with_bias, Rng& rng, const std::string& name = "conv2d");

    void init_weight(Rng& rng);
    // Accepts the logical (out, in, kh, kw) shape or the matricized form.
    void set_weight(const Tensor& w);

    // x is (batch, in_channels, h, w); result (batch, out_channels, h', w').
    Graph::NodeId apply(Graph& g, Graph::NodeId x) const;

    const ParamPtr& weight() const { return weight_; }
    const ParamPtr& bias() const { return bias_; }
    int out_channels() const { return out_channels_; }
    std::vector<ParamPtr> parameters() const;

private:
    int in_channels_, out_channels_, kernel_h_, kernel_w_, stride_, padding_;
    ManifoldRequest request_;
    ParamPtr weight_;
    ParamPtr bias_;
};

struct ReLU {};
struct LogSoftmax {};

// Ordered container of layers and activations. Layer instances may appear
// at most once (no parameter aliasing).
class Sequential {
public:
    using Item = std::variant<std::shared_ptr<Linear>, std::shared_ptr<Conv2d>, ReLU, LogSoftmax>;

    void add(std::shared_ptr<Linear> layer);
    void add(std::shared_ptr<Conv2d> layer);
    void add(ReLU r) { items_.emplace_back(r); }
    void add(LogSoftmax s) { items_.emplace_back(s); }

    Graph::NodeId apply(Graph& g, Graph::NodeId x) const;

    // Every parameter exactly once, in layer order, weight before bias.
    std::vector<ParamPtr> parameters() const;

    const std::vector<Item>& items() const { return items_; }

private:
    void check_not_aliased(const void* layer) const;
    std::vector<Item> items_;
};

inline std::vector<ParamPtr> collect_parameters(const Sequential& model) {
    return model.parameters();
}

} // namespace rdl::nn
