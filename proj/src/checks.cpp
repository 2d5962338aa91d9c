#include "rdl/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rdl/autodiff.hpp"
#include "rdl/config.hpp"
#include "rdl/errors.hpp"
#include "rdl/linalg.hpp"
#include "rdl/manifold.hpp"
#include "rdl/nn.hpp"
#include "rdl/optim.hpp"
#include "rdl/problems.hpp"
#include "rdl/training.hpp"

namespace rdl::checks {

namespace {

using autodiff::Graph;
using autodiff::ParamPtr;
using manifold::ManifoldDescriptor;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string fresh_dir(const std::string& tag) {
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    auto dir = std::filesystem::temp_directory_path() /
               ("rdl_checks_" + tag + "_" + std::to_string(stamp));
    std::filesystem::create_directories(dir);
    return dir.string();
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

// Gaussian entries pushed `margin` away from zero (sign-preserving), so
// finite differences never straddle a relu kink.
Tensor gaussian_margin(std::vector<int> shape, Rng& rng, double margin) {
    Tensor t = Tensor::gaussian(std::move(shape), rng);
    if (margin > 0) {
        for (int i = 0; i < t.size(); ++i) t[i] += (t[i] >= 0 ? margin : -margin);
    }
    return t;
}

ParamPtr euclid_param(const std::string& name, const std::vector<int>& shape, Rng& rng,
                      double margin = 0.0) {
    return std::make_shared<autodiff::Parameter>(name, gaussian_margin(shape, rng, margin),
                                                 ManifoldDescriptor::euclidean(shape));
}

} // namespace

CheckResult check_gradcheck() {
    Timer timer;
    const double h = 1e-6;
    double worst = 0.0;
    std::string worst_label = "none";
    auto note = [&](const std::string& label, double err) {
        if (err > worst) {
            worst = err;
            worst_label = label;
        }
    };

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);

        for (int ta = 0; ta < 2; ++ta) {
            for (int tb = 0; tb < 2; ++tb) {
                Graph g;
                auto a = euclid_param("a", ta ? std::vector<int>{4, 3} : std::vector<int>{3, 4},
                                      rng);
                auto b = euclid_param("b", tb ? std::vector<int>{5, 4} : std::vector<int>{4, 5},
                                      rng);
                g.sum(g.matmul(g.parameter(a), g.parameter(b), ta != 0, tb != 0));
                note("matmul", autodiff::grad_check(g, {}, a, h));
                note("matmul", autodiff::grad_check(g, {}, b, h));
            }
        }
        {
            Graph g;
            auto w = euclid_param("w", {3, 6}, rng);
            auto col = g.input("col", {2, 6, 5});
            g.sum(g.matmul(g.parameter(w), col));
            std::map<std::string, Tensor> inputs{{"col", Tensor::gaussian({2, 6, 5}, rng)}};
            note("matmul_batched", autodiff::grad_check(g, inputs, w, h));
        }
        {
            Graph g;
            auto x = euclid_param("x", {4, 5}, rng);
            auto b = euclid_param("b", {5}, rng);
            g.sum(g.relu(g.add_bias(g.parameter(x), g.parameter(b), 1)));
            note("add_bias", autodiff::grad_check(g, {}, x, h));
            note("add_bias", autodiff::grad_check(g, {}, b, h));
        }
        {
            Graph g;
            auto x = euclid_param("x", {2, 3, 4}, rng);
            auto b = euclid_param("b", {3}, rng);
            g.sum(g.add_bias(g.parameter(x), g.parameter(b), 1));
            note("add_bias3", autodiff::grad_check(g, {}, x, h));
            note("add_bias3", autodiff::grad_check(g, {}, b, h));
        }
        {
            Graph g;
            auto x = euclid_param("x", {4, 5}, rng, 0.25);
            g.sum(g.relu(g.parameter(x)));
            note("relu", autodiff::grad_check(g, {}, x, h));
        }
        {
            Graph g;
            auto x = euclid_param("x", {4, 5}, rng);
            g.sum(g.log_softmax_rows(g.parameter(x)));
            note("log_softmax_rows", autodiff::grad_check(g, {}, x, h));
        }
        {
            Graph g;
            auto logits = euclid_param("logits", {6, 4}, rng);
            std::vector<int> targets;
            for (int i = 0; i < 6; ++i) targets.push_back(static_cast<int>(rng.next_index(4)));
            g.nll_loss_mean(g.log_softmax_rows(g.parameter(logits)), targets);
            note("nll_loss_mean", autodiff::grad_check(g, {}, logits, h));
        }
        {
            Graph g;
            auto x = euclid_param("x", {4, 6}, rng, 0.25);
            g.sum(g.relu(g.reshape(g.parameter(x), {3, 8})));
            note("reshape", autodiff::grad_check(g, {}, x, h));
        }
        {
            Graph g;
            auto x = euclid_param("img", {2, 3, 5, 4}, rng);
            autodiff::Conv2dGeometry geom;
            geom.in_channels = 3;
            geom.height = 5;
            geom.width = 4;
            geom.kernel_h = 2;
            geom.kernel_w = 2;
            geom.stride = 1;
            geom.padding = 1;
            g.sum(g.im2col(g.parameter(x), geom));
            note("im2col", autodiff::grad_check(g, {}, x, h));
        }
        {
            Graph g;
            auto x = euclid_param("x", {3, 3}, rng);
            g.sum(g.scale(g.parameter(x), 2.5));
            note("scale", autodiff::grad_check(g, {}, x, h));
        }
        {
            Graph g;
            auto x = euclid_param("x", {7}, rng);
            g.sum(g.parameter(x));
            note("sum", autodiff::grad_check(g, {}, x, h));
        }

        // The full small MLP, one gradient check per parameter.
        {
            const int batch = 4;
            nn::Sequential model =
                cli::build_mlp(64, {32, 32, 32}, 4, nn::ManifoldRequest::stiefel, true, rng);
            Graph g;
            auto in = g.input("x", {batch, 64});
            auto lp = model.apply(g, in);
            std::vector<int> targets;
            for (int i = 0; i < batch; ++i) targets.push_back(static_cast<int>(rng.next_index(4)));
            g.nll_loss_mean(lp, targets);
            std::map<std::string, Tensor> inputs{{"x", Tensor::gaussian({batch, 64}, rng)}};
            for (const auto& p : model.parameters())
                note("mlp:" + p->name, autodiff::grad_check(g, inputs, p, h));
        }
    }

    CheckResult r;
    r.name = "gradcheck";
    r.seconds = timer.seconds();
    r.passed = worst <= 1e-5 && r.seconds < 30.0;
    r.detail = "max relative error " + fmt(worst) + " (worst: " + worst_label +
               ", tolerance 1e-5), " + fmt(r.seconds) + " s (limit 30)";
    return r;
}

CheckResult check_retraction() {
    Timer timer;
    bool ok = true;
    std::ostringstream why;
    double worst_feas = 0, worst_decay = 0, worst_proj = 0, worst_dir = 0;

    const std::vector<ManifoldDescriptor> descriptors = {
        ManifoldDescriptor::euclidean({7, 3}),
        ManifoldDescriptor::stiefel(6, 3),
        ManifoldDescriptor::stiefel(2, 1),
        ManifoldDescriptor::stiefel(5, 5),
        ManifoldDescriptor::stiefel(6, 3, /*transposed=*/true),
        ManifoldDescriptor::positive_definite(4),
    };

    std::uint64_t seed = 100;
    for (const auto& d : descriptors) {
        Rng rng(seed++);
        for (int trial = 0; trial < 20; ++trial) {
            const Tensor x = manifold::rand(d, rng);
            const Tensor u = manifold::proj(d, x, Tensor::gaussian(d.value_shape(), rng));

            // Feasibility of a unit retraction step.
            const double feas = manifold::membership_residual(d, manifold::retr(d, x, u, 1.0));
            worst_feas = std::max(worst_feas, feas);
            if (feas > 1e-8) {
                ok = false;
                why << " feasibility " << fmt(feas) << " on " << d.to_string() << ";";
            }

            // Zero step returns the identical representation.
            const Tensor back = manifold::retr(d, x, u, 0.0);
            if (std::memcmp(back.data(), x.data(),
                            sizeof(double) * static_cast<std::size_t>(x.size())) != 0) {
                ok = false;
                why << " retr(x,u,0) not bitwise x on " << d.to_string() << ";";
            }

            // Second-order decay of the departure from the straight line.
            const double t = 1e-2;
            auto departure = [&](double s) {
                return frobenius_norm(sub(manifold::retr(d, x, u, s), axpy(x, s, u)));
            };
            const double rt = departure(t);
            const double rh = departure(t / 2);
            worst_decay = std::max(worst_decay, rt > 0 ? rh / rt : 0.0);
            if (rh > 0.3 * rt) {
                ok = false;
                why << " decay " << fmt(rh) << " !<= 0.3*" << fmt(rt) << " on " << d.to_string()
                    << ";";
            }

            // Projection idempotence.
            const Tensor g = Tensor::gaussian(d.value_shape(), rng);
            const Tensor p1 = manifold::proj(d, x, g);
            const Tensor p2 = manifold::proj(d, x, p1);
            const double proj_err =
                frobenius_norm(sub(p1, p2)) / std::max(1.0, frobenius_norm(p1));
            worst_proj = std::max(worst_proj, proj_err);
            if (proj_err > 1e-12) {
                ok = false;
                why << " proj idempotence " << fmt(proj_err) << " on " << d.to_string() << ";";
            }

            // The converted gradient realizes the directional derivative of
            // f(y) = <c, y> through the retraction.
            const Tensor c = Tensor::gaussian(d.value_shape(), rng);
            const Tensor rgrad = manifold::egrad2rgrad(d, x, c);
            const double lhs = manifold::inner(d, x, rgrad, u);
            const double hd = 1e-6;
            const double rhs = (dot(c, manifold::retr(d, x, u, hd)) -
                                dot(c, manifold::retr(d, x, u, -hd))) /
                               (2 * hd);
            const double dir_err = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
            worst_dir = std::max(worst_dir, dir_err);
            if (dir_err > 1e-5) {
                ok = false;
                why << " directional derivative " << fmt(dir_err) << " on " << d.to_string()
                    << ";";
            }

            // Transport lands in the target tangent space.
            const Tensor u2 = manifold::proj(d, x, Tensor::gaussian(d.value_shape(), rng));
            const Tensor y = manifold::retr(d, x, u2, 0.7);
            if (!manifold::is_tangent(d, y, manifold::transp(d, x, y, u), 1e-8)) {
                ok = false;
                why << " transport not tangent on " << d.to_string() << ";";
            }
        }
    }

    CheckResult r;
    r.name = "retraction";
    r.seconds = timer.seconds();
    r.passed = ok && r.seconds < 10.0;
    r.detail = "feasibility " + fmt(worst_feas) + " (<=1e-8), decay ratio " + fmt(worst_decay) +
               " (<=0.3), proj idempotence " + fmt(worst_proj) + " (<=1e-12), directional " +
               fmt(worst_dir) + " (<=1e-5), " + fmt(r.seconds) + " s (limit 10)" + why.str();
    return r;
}

CheckResult check_rayleigh() {
    Timer timer;
    Rng rng(7);
    problems::Rayleigh prob(50, 5, rng);
    const double target = prob.oracle();

    // Conjugate gradient phase.
    auto x_cg = std::make_shared<autodiff::Parameter>(
        "x", manifold::rand(prob.descriptor, rng), prob.descriptor);
    optim::Optimizer cg{optim::CgConfig{}};
    auto objective = [&](const ParamPtr& p) {
        return std::function<double()>([&prob, p] { return prob.value(p->value); });
    };
    int cg_iters = 0;
    double cg_err = std::abs(prob.value(x_cg->value) - target);
    for (int it = 1; it <= 500 && cg_err > 1e-6; ++it) {
        cg_iters = it;
        autodiff::zero_grad({x_cg});
        x_cg->accumulate_egrad(prob.egrad(x_cg->value));
        try {
            cg.step_all({x_cg}, objective(x_cg));
        } catch (const LineSearchFailed&) {
            cg.reset_state();
        }
        cg_err = std::abs(prob.value(x_cg->value) - target);
    }

    // Full-batch SGD phase.
    auto x_sgd = std::make_shared<autodiff::Parameter>(
        "x", manifold::rand(prob.descriptor, rng), prob.descriptor);
    optim::Optimizer sgd{optim::SgdConfig{1e-3, 0.0}};
    for (int it = 0; it < 5000; ++it) {
        autodiff::zero_grad({x_sgd});
        x_sgd->accumulate_egrad(prob.egrad(x_sgd->value));
        sgd.step_all({x_sgd});
    }
    const double sgd_err = std::abs(prob.value(x_sgd->value) - target);

    CheckResult r;
    r.name = "rayleigh";
    r.seconds = timer.seconds();
    r.passed = cg_err <= 1e-6 && cg_iters <= 500 && sgd_err <= 1e-4 && r.seconds < 60.0;
    r.detail = "cg |f-oracle| " + fmt(cg_err) + " after " + std::to_string(cg_iters) +
               " iters (<=1e-6 in <=500), sgd |f-oracle| " + fmt(sgd_err) + " (<=1e-4), " +
               fmt(r.seconds) + " s (limit 60)";
    return r;
}

CheckResult check_karcher() {
    Timer timer;
    Rng rng(11);
    problems::KarcherMean prob(5, 2, rng);
    const Tensor target = prob.midpoint_oracle();

    auto x = std::make_shared<autodiff::Parameter>("x", manifold::rand(prob.descriptor, rng),
                                                   prob.descriptor);
    optim::Optimizer sgd{optim::SgdConfig{0.1, 0.0}};
    for (int it = 0; it < 300; ++it) {
        autodiff::zero_grad({x});
        x->accumulate_egrad(prob.egrad(x->value));
        sgd.step_all({x});
    }
    const double err = frobenius_norm(sub(x->value, target));

    CheckResult r;
    r.name = "karcher";
    r.seconds = timer.seconds();
    r.passed = err <= 1e-5 && r.seconds < 30.0;
    r.detail = "|x - midpoint|_F " + fmt(err) + " (<=1e-5) after 300 sgd steps, " +
               fmt(r.seconds) + " s (limit 30)";
    return r;
}

CheckResult check_mlp() {
    Timer timer;
    cli::RunConfig cfg;
    cfg.task = cli::Task::mlp_classify;
    cfg.dataset = "synthetic(4, 64, 512)";
    cfg.hidden = {32, 32, 32};
    cfg.weight_manifold = nn::ManifoldRequest::stiefel;
    cfg.bias = true;
    cfg.optimizer = cli::OptimizerKind::adagrad;
    cfg.lr = 1e-2;
    cfg.epochs = 10;
    cfg.batch_size = 32;
    cfg.seed = 1;
    cfg.output_dir = fresh_dir("mlp");

    cli::TrainResult tr = cli::run_training(cfg);
    const double loss1 = tr.records.front().loss;
    const double loss10 = tr.records.back().loss;
    double worst_residual = 0.0;
    for (const auto& rec : tr.records)
        worst_residual = std::max(worst_residual, rec.constraint_residual);
    const double accuracy = tr.records.back().accuracy;

    CheckResult r;
    r.name = "mlp";
    r.seconds = timer.seconds();
    r.passed = loss10 <= 0.5 * loss1 && worst_residual <= 1e-6 && accuracy >= 0.9 &&
               r.seconds < 120.0;
    r.detail = "epoch-10 loss " + fmt(loss10) + " vs 0.5*epoch-1 " + fmt(0.5 * loss1) +
               ", residual " + fmt(worst_residual) + " (<=1e-6), accuracy " + fmt(accuracy) +
               " (>=0.9), " + fmt(r.seconds) + " s (limit 120)";
    return r;
}

namespace {

Tensor naive_conv(const Tensor& x, const Tensor& w4, const Tensor& bias, int stride, int pad) {
    const int b_n = x.dim(0), c_n = x.dim(1), h_n = x.dim(2), w_n = x.dim(3);
    const int oc_n = w4.dim(0), kh = w4.dim(2), kw = w4.dim(3);
    const int oh = (h_n + 2 * pad - kh) / stride + 1;
    const int ow = (w_n + 2 * pad - kw) / stride + 1;
    Tensor out({b_n, oc_n, oh, ow});
    for (int b = 0; b < b_n; ++b)
        for (int oc = 0; oc < oc_n; ++oc)
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    double acc = bias.defined() ? bias[oc] : 0.0;
                    for (int c = 0; c < c_n; ++c)
                        for (int u = 0; u < kh; ++u)
                            for (int v = 0; v < kw; ++v) {
                                const int ih = i * stride - pad + u;
                                const int iw = j * stride - pad + v;
                                if (ih < 0 || ih >= h_n || iw < 0 || iw >= w_n) continue;
                                acc += x[((b * c_n + c) * h_n + ih) * w_n + iw] *
                                       w4[((oc * c_n + c) * kh + u) * kw + v];
                            }
                    out[((b * oc_n + oc) * oh + i) * ow + j] = acc;
                }
    return out;
}

} // namespace

CheckResult check_conv() {
    Timer timer;
    Rng rng(3);
    double worst = 0.0;

    for (int trial = 0; trial < 25; ++trial) {
        int b, c, oc, kh, kw, stride, pad, h, w;
        while (true) {
            b = 1 + static_cast<int>(rng.next_index(3));
            c = 1 + static_cast<int>(rng.next_index(3));
            oc = 1 + static_cast<int>(rng.next_index(4));
            kh = 1 + static_cast<int>(rng.next_index(3));
            kw = 1 + static_cast<int>(rng.next_index(3));
            stride = 1 + static_cast<int>(rng.next_index(2));
            pad = static_cast<int>(rng.next_index(3));
            h = kh + static_cast<int>(rng.next_index(5));
            w = kw + static_cast<int>(rng.next_index(5));
            if ((h + 2 * pad - kh) % stride == 0 && (w + 2 * pad - kw) % stride == 0) break;
        }

        nn::Conv2d conv(c, oc, kh, kw, stride, pad, nn::ManifoldRequest::none, true, rng);
        const Tensor w4 = Tensor::gaussian({oc, c, kh, kw}, rng);
        const Tensor bias = Tensor::gaussian({oc}, rng);
        conv.set_weight(w4);
        conv.bias()->set_value(bias);

        const Tensor x = Tensor::gaussian({b, c, h, w}, rng);
        Graph g;
        auto out = conv.apply(g, g.input("x", {b, c, h, w}));
        g.forward({{"x", x}});
        worst = std::max(worst, max_abs_diff(g.output(out), naive_conv(x, w4, bias, stride, pad)));
    }

    // A Stiefel-constrained convolution keeps its matricized weight
    // orthonormal through optimization.
    nn::Conv2d sconv(3, 4, 3, 3, 1, 1, nn::ManifoldRequest::stiefel, true, rng);
    const Tensor x = Tensor::gaussian({2, 3, 8, 8}, rng);
    auto params = sconv.parameters();
    optim::Optimizer sgd{optim::SgdConfig{1e-2, 0.9}};
    for (int step = 0; step < 100; ++step) {
        autodiff::zero_grad(params);
        Graph g;
        g.sum(g.relu(sconv.apply(g, g.input("x", {2, 3, 8, 8}))));
        g.forward({{"x", x}});
        g.backward();
        sgd.step_all(params);
    }
    const double residual =
        manifold::membership_residual(sconv.weight()->descriptor, sconv.weight()->value);

    CheckResult r;
    r.name = "conv";
    r.seconds = timer.seconds();
    r.passed = worst <= 1e-12 && residual <= 1e-6 && r.seconds < 30.0;
    r.detail = "max |im2col - naive| " + fmt(worst) + " (<=1e-12) over 25 geometries, stiefel " +
               "residual " + fmt(residual) + " (<=1e-6) after 100 sgd steps, " + fmt(r.seconds) +
               " s (limit 30)";
    return r;
}

CheckResult check_determinism() {
    Timer timer;
    const std::string cfg_text = "task = mlp_classify\n"
                                 "dataset = synthetic(4, 16, 128)\n"
                                 "arch.hidden = 16\n"
                                 "arch.manifold = stiefel\n"
                                 "optimizer.kind = adagrad\n"
                                 "optimizer.lr = 0.01\n"
                                 "epochs = 3\n"
                                 "batch_size = 32\n"
                                 "seed = 5\n";

    cli::RunConfig c1 = cli::parse_config_text(cfg_text);
    c1.output_dir = fresh_dir("det1");
    cli::RunConfig c2 = cli::parse_config_text(cfg_text);
    c2.output_dir = fresh_dir("det2");
    cli::run_training(c1);
    cli::run_training(c2);

    const std::string m1 = read_file_bytes(c1.output_dir + "/metrics.csv");
    const std::string m2 = read_file_bytes(c2.output_dir + "/metrics.csv");

    CheckResult r;
    r.name = "determinism";
    r.seconds = timer.seconds();
    r.passed = !m1.empty() && m1 == m2;
    r.detail = std::string(m1 == m2 ? "metrics files identical" : "metrics files differ") + " (" +
               std::to_string(m1.size()) + " bytes), " + fmt(r.seconds) + " s";
    return r;
}

std::vector<std::string> suite_names() {
    return {"gradcheck", "retraction", "rayleigh", "karcher", "mlp", "conv", "determinism"};
}

CheckResult run_suite(const std::string& name) {
    if (name == "gradcheck") return check_gradcheck();
    if (name == "retraction") return check_retraction();
    if (name == "rayleigh") return check_rayleigh();
    if (name == "karcher") return check_karcher();
    if (name == "mlp") return check_mlp();
    if (name == "conv") return check_conv();
    if (name == "determinism") return check_determinism();
    throw ValidationError("unknown check suite '" + name + "'");
}

} // namespace rdl::checks
