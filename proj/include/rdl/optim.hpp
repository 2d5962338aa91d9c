#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rdl/autodiff.hpp"
#include "rdl/manifold.hpp"
#include "rdl/tensor.hpp"

namespace rdl::optim {

using autodiff::ParamPtr;

struct SgdConfig {
    double lr = 0.0;
    double momentum = 0.0; // in [0, 1)
};

struct AdagradConfig {
    double lr = 0.0;
    double eps = 1e-10;
};

struct ArmijoConfig {
    double c1 = 1e-4;
    double contraction = 0.5;
    int max_backtracks = 30;
    double initial_step = 1.0;
};

enum class BetaRule { fletcher_reeves, polak_ribiere_plus };

struct CgConfig {
    BetaRule beta_rule = BetaRule::fletcher_reeves;
    ArmijoConfig armijo;
};

// Per-parameter optimizer state. Tangent tensors (momentum_buffer,
// prev_direction, prev_grad) are stored at prev_point and pass is_tangent
// there at 1e-8.
struct ParamState {
    std::optional<Tensor> momentum_buffer;
    std::optional<Tensor> accumulator;
    std::optional<Tensor> prev_direction;
    std::optional<Tensor> prev_grad;
    double prev_grad_inner = 0.0;
    std::optional<Tensor> prev_point;
};

// Fills p.rgrad from p.egrad through the parameter's manifold and returns it.
const Tensor& compute_rgrad(autodiff::Parameter& p);

// Evaluates the full objective at a candidate value for one parameter, all
// other parameters held fixed. Required by the conjugate-gradient line search.
using PointObjective = std::function<double(const Tensor&)>;

class Optimizer {
public:
    using Config = std::variant<SgdConfig, AdagradConfig, CgConfig>;

    explicit Optimizer(Config config);

    void sgd_step(autodiff::Parameter& p);
    void adagrad_step(autodiff::Parameter& p);
    void cg_step(autodiff::Parameter& p, const PointObjective& objective);

    // Runs compute_rgrad + the configured step for every parameter, skipping
    // those with no accumulated egrad. `objective` re-evaluates the full loss
    // at the current parameter values; only conjugate gradient needs it.
    void step_all(const std::vector<ParamPtr>& params,
                  const std::function<double()>& objective = {});

    const Config& config() const { return config_; }
    bool needs_objective() const { return std::holds_alternative<CgConfig>(config_); }

    // State for one parameter id; null if the parameter was never stepped.
    const ParamState* state_for(std::uint64_t id) const;
    void reset_state();

private:
    ParamState& state_slot(std::uint64_t id) { return states_[id]; }

    Config config_;
    std::map<std::uint64_t, ParamState> states_;
};

} // namespace rdl::optim
