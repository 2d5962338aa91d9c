#include "rdl/optim.hpp"

#include <algorithm>
#include <cmath>

#include "rdl/errors.hpp"

namespace rdl::optim {

using autodiff::Parameter;

const Tensor& compute_rgrad(Parameter& p) {
    if (!p.egrad) throw MissingGradient("compute_rgrad: no gradient for '" + p.name + "'");
    p.rgrad = manifold::egrad2rgrad(p.descriptor, p.value, *p.egrad);
    return *p.rgrad;
}

namespace {

void validate(const SgdConfig& c) {
    if (!(c.lr > 0)) throw ValidationError("sgd: lr must be > 0");
    if (c.momentum < 0 || c.momentum >= 1) throw ValidationError("sgd: momentum must be in [0,1)");
}

void validate(const AdagradConfig& c) {
    if (!(c.lr > 0)) throw ValidationError("adagrad: lr must be > 0");
    if (!(c.eps > 0)) throw ValidationError("adagrad: eps must be > 0");
}

void validate(const CgConfig& c) {
    if (!(c.armijo.c1 > 0 && c.armijo.c1 < 1))
        throw ValidationError("conjugate_gradient: c1 must be in (0,1)");
    if (!(c.armijo.contraction > 0 && c.armijo.contraction < 1))
        throw ValidationError("conjugate_gradient: contraction must be in (0,1)");
    if (c.armijo.max_backtracks < 1)
        throw ValidationError("conjugate_gradient: max_backtracks must be >= 1");
    if (!(c.armijo.initial_step > 0))
        throw ValidationError("conjugate_gradient: initial_step must be > 0");
}

const Tensor& require_rgrad(const Parameter& p, const char* who) {
    if (!p.rgrad) throw MissingGradient(std::string(who) + ": rgrad not computed for '" + p.name + "'");
    return *p.rgrad;
}

} // namespace

Optimizer::Optimizer(Config config) : config_(std::move(config)) {
    std::visit([](const auto& c) { validate(c); }, config_);
}

const ParamState* Optimizer::state_for(std::uint64_t id) const {
    auto it = states_.find(id);
    return it == states_.end() ? nullptr : &it->second;
}

void Optimizer::reset_state() { states_.clear(); }

void Optimizer::sgd_step(Parameter& p) {
    const auto& cfg = std::get<SgdConfig>(config_);
    const Tensor& g = require_rgrad(p, "sgd_step");
    const auto& d = p.descriptor;

    if (cfg.momentum == 0.0) {
        p.value = manifold::retr(d, p.value, g, -cfg.lr);
        return;
    }

    ParamState& st = state_slot(p.id);
    Tensor buffer = g;
    if (st.momentum_buffer) {
        Tensor carried = manifold::transp(d, *st.prev_point, p.value, *st.momentum_buffer);
        buffer = axpy(g, cfg.momentum, carried); // g + momentum * carried
    }
    Tensor next = manifold::retr(d, p.value, buffer, -cfg.lr);
    // Keep the buffer tangent at the point we record.
    st.momentum_buffer = manifold::transp(d, p.value, next, buffer);
    st.prev_point = next;
    p.value = std::move(next);
}

void Optimizer::adagrad_step(Parameter& p) {
    const auto& cfg = std::get<AdagradConfig>(config_);
    const Tensor& g = require_rgrad(p, "adagrad_step");
    const auto& d = p.descriptor;

    ParamState& st = state_slot(p.id);
    if (!st.accumulator) st.accumulator = Tensor::zeros(g.shape());
    Tensor& acc = *st.accumulator;
    for (int i = 0; i < g.size(); ++i) acc[i] += g[i] * g[i];

    Tensor dir = Tensor::zeros(g.shape());
    for (int i = 0; i < g.size(); ++i) dir[i] = g[i] / (std::sqrt(acc[i]) + cfg.eps);

    // Entrywise scaling leaves the tangent space; re-project before retracting.
    p.value = manifold::retr(d, p.value, manifold::proj(d, p.value, dir), -cfg.lr);
}

void Optimizer::cg_step(Parameter& p, const PointObjective& objective) {
    const auto& cfg = std::get<CgConfig>(config_);
    if (!objective) throw Error("cg_step: objective callable required");
    const Tensor& g = require_rgrad(p, "cg_step");
    const auto& d = p.descriptor;
    const Tensor x = p.value;

    const double gg = manifold::inner(d, x, g, g);
    if (std::sqrt(gg) <= 1e-12) return;

    ParamState& st = state_slot(p.id);
    Tensor dir = scaled(g, -1.0);
    if (st.prev_direction && st.prev_grad_inner > 0) {
        Tensor prev_dir = manifold::transp(d, *st.prev_point, x, *st.prev_direction);
        double beta = 0.0;
        if (cfg.beta_rule == BetaRule::fletcher_reeves) {
            beta = gg / st.prev_grad_inner;
        } else {
            Tensor prev_g = manifold::transp(d, *st.prev_point, x, *st.prev_grad);
            beta = std::max(0.0, (gg - manifold::inner(d, x, g, prev_g)) / st.prev_grad_inner);
        }
        dir = axpy(scaled(g, -1.0), beta, prev_dir);
        if (manifold::inner(d, x, dir, g) >= 0) dir = scaled(g, -1.0); // not descent: restart
    }

    const double f0 = objective(x);
    const double slope = manifold::inner(d, x, g, dir); // < 0 for a descent direction
    double t = cfg.armijo.initial_step;
    for (int k = 0; k < cfg.armijo.max_backtracks; ++k) {
        Tensor candidate = manifold::retr(d, x, dir, t);
        if (objective(candidate) <= f0 + cfg.armijo.c1 * t * slope) {
            st.prev_point = x;
            st.prev_direction = std::move(dir);
            st.prev_grad = g;
            st.prev_grad_inner = gg;
            p.value = std::move(candidate);
            return;
        }
        t *= cfg.armijo.contraction;
    }
    throw LineSearchFailed("cg_step: no Armijo step within " +
                           std::to_string(cfg.armijo.max_backtracks) + " backtracks for '" +
                           p.name + "'");
}

void Optimizer::step_all(const std::vector<ParamPtr>& params,
                         const std::function<double()>& objective) {
    if (needs_objective() && !objective)
        throw Error("step_all: conjugate gradient needs an objective callable");

    for (const auto& p : params) {
        if (!p || !p->egrad) continue;
        auto run = [&] {
            compute_rgrad(*p);
            if (std::holds_alternative<SgdConfig>(config_)) {
                sgd_step(*p);
            } else if (std::holds_alternative<AdagradConfig>(config_)) {
                adagrad_step(*p);
            } else {
                cg_step(*p, [&](const Tensor& candidate) {
                    Tensor saved = p->value;
                    p->value = candidate;
                    double f = objective();
                    p->value = std::move(saved);
                    return f;
                });
            }
        };
        try {
            run();
        } catch (const LineSearchFailed& e) {
            throw LineSearchFailed("parameter '" + p->name + "': " + e.what());
        } catch (const MissingGradient& e) {
            throw MissingGradient("parameter '" + p->name + "': " + e.what());
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite("parameter '" + p->name + "': " + e.what());
        } catch (const ShapeMismatch& e) {
            throw ShapeMismatch("parameter '" + p->name + "': " + e.what());
        } catch (const Error& e) {
            throw Error("parameter '" + p->name + "': " + e.what());
        }
    }
}

} // namespace rdl::optim
