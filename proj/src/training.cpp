#include "rdl/training.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "rdl/errors.hpp"
#include "rdl/optim.hpp"
#include "rdl/problems.hpp"

namespace rdl::cli {

using autodiff::Graph;
using autodiff::ParamPtr;

nn::Sequential build_mlp(int in_dim, const std::vector<int>& hidden, int classes,
                         nn::ManifoldRequest request, bool with_bias, Rng& rng) {
    if (in_dim < 1) throw ValidationError("mlp: input dimension must be >= 1");
    if (classes < 2) throw ValidationError("mlp: need at least 2 classes");
    nn::Sequential model;
    int prev = in_dim;
    int index = 0;
    for (int h : hidden) {
        model.add(std::make_shared<nn::Linear>(prev, h, request, with_bias, rng,
                                               "linear" + std::to_string(index++)));
        model.add(nn::ReLU{});
        prev = h;
    }
    model.add(std::make_shared<nn::Linear>(prev, classes, request, with_bias, rng,
                                           "linear" + std::to_string(index)));
    model.add(nn::LogSoftmax{});
    return model;
}

namespace {

struct BatchGraph {
    Graph graph;
    Graph::NodeId log_probs = 0;
    Tensor x;
};

BatchGraph build_batch(const nn::Sequential& model, const Dataset& ds,
                       const std::vector<int>& rows) {
    if (rows.empty()) throw Error("batch_loss: empty batch");
    const int b = static_cast<int>(rows.size());
    const int d = ds.dim();

    BatchGraph bg;
    bg.x = Tensor({b, d});
    std::vector<int> targets(rows.size());
    for (int i = 0; i < b; ++i) {
        const int r = rows[static_cast<std::size_t>(i)];
        targets[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(r)];
        for (int j = 0; j < d; ++j) bg.x(i, j) = ds.features(r, j);
    }

    auto in = bg.graph.input("x", {b, d});
    bg.log_probs = model.apply(bg.graph, in);
    bg.graph.nll_loss_mean(bg.log_probs, targets);
    return bg;
}

} // namespace

double batch_loss(const nn::Sequential& model, const Dataset& ds, const std::vector<int>& rows,
                  bool with_backward) {
    BatchGraph bg = build_batch(model, ds, rows);
    const double loss = bg.graph.forward({{"x", bg.x}})[0];
    if (with_backward) bg.graph.backward();
    return loss;
}

EvalResult evaluate(const nn::Sequential& model, const Dataset& ds) {
    std::vector<int> rows(static_cast<std::size_t>(ds.size()));
    std::iota(rows.begin(), rows.end(), 0);
    BatchGraph bg = build_batch(model, ds, rows);

    EvalResult out;
    out.loss = bg.graph.forward({{"x", bg.x}})[0];

    const Tensor& lp = bg.graph.output(bg.log_probs);
    int correct = 0;
    for (int i = 0; i < ds.size(); ++i) {
        int best = 0;
        for (int c = 1; c < ds.classes; ++c)
            if (lp(i, c) > lp(i, best)) best = c;
        if (best == ds.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    return out;
}

double max_constraint_residual(const std::vector<ParamPtr>& params) {
    double worst = 0.0;
    for (const auto& p : params)
        worst = std::max(worst, manifold::membership_residual(p->descriptor, p->value));
    return worst;
}

namespace {

TrainResult train_mlp(RunConfig& cfg, Rng& rng) {
    Dataset ds = load_dataset(cfg.dataset, cfg.classes, rng);
    resolve_batch_size(cfg, ds.size());

    nn::Sequential model =
        build_mlp(ds.dim(), cfg.hidden, ds.classes, cfg.weight_manifold, cfg.bias, rng);
    std::vector<ParamPtr> params = model.parameters();
    optim::Optimizer opt(cfg.optimizer_config());
    auto full_loss = [&] { return evaluate(model, ds).loss; };

    std::vector<int> order(static_cast<std::size_t>(ds.size()));
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.params = params;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<int> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(stop));
            autodiff::zero_grad(params);
            batch_loss(model, ds, rows, /*with_backward=*/true);
            opt.step_all(params, full_loss);
        }
        EvalResult ev = evaluate(model, ds);
        result.records.push_back({epoch, ev.loss, max_constraint_residual(params), ev.accuracy});
    }
    return result;
}

// Shared driver for the analytic tasks: one epoch = one optimizer step on
// the exact objective gradient.
template <typename Problem>
TrainResult train_analytic(const RunConfig& cfg, const Problem& prob, const std::string& name,
                           Rng& rng) {
    auto p = std::make_shared<autodiff::Parameter>(name, manifold::rand(prob.descriptor, rng),
                                                   prob.descriptor);
    std::vector<ParamPtr> params{p};
    optim::Optimizer opt(cfg.optimizer_config());
    auto objective = [&] { return prob.value(p->value); };

    TrainResult result;
    result.params = params;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        autodiff::zero_grad(params);
        p->accumulate_egrad(prob.egrad(p->value));
        try {
            opt.step_all(params, objective);
        } catch (const LineSearchFailed&) {
            // No acceptable step exists within floating-point resolution of
            // the objective: converged. Try once more from a clean state,
            // then stop.
            opt.reset_state();
            try {
                opt.step_all(params, objective);
            } catch (const LineSearchFailed&) {
                result.records.push_back({epoch, prob.value(p->value),
                                          manifold::membership_residual(p->descriptor, p->value),
                                          0.0});
                break;
            }
        }
        result.records.push_back({epoch, prob.value(p->value),
                                  manifold::membership_residual(p->descriptor, p->value), 0.0});
    }
    return result;
}

} // namespace

TrainResult run_training(RunConfig cfg) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.output_dir + "'");

    Rng rng(cfg.seed);
    TrainResult result;
    switch (cfg.task) {
        case Task::mlp_classify:
            result = train_mlp(cfg, rng);
            break;
        case Task::rayleigh: {
            problems::Rayleigh prob(cfg.rayleigh_n, cfg.rayleigh_p, rng);
            result = train_analytic(cfg, prob, "rayleigh.x", rng);
            break;
        }
        case Task::karcher_mean: {
            problems::KarcherMean prob(cfg.karcher_n, cfg.karcher_k, rng);
            result = train_analytic(cfg, prob, "karcher.x", rng);
            break;
        }
    }

    write_metrics(result.records, cfg.output_dir + "/metrics.csv");
    save_checkpoint(result.params, cfg.output_dir + "/checkpoint.txt");
    return result;
}

void write_metrics(const std::vector<EpochRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file '" + path + "'");
    out << "epoch,loss,constraint_residual,accuracy\n";
    for (const EpochRecord& r : records) {
        out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.constraint_residual)
            << ',' << format_double(r.accuracy) << '\n';
    }
    if (!out) throw IoError("failed writing metrics file '" + path + "'");
}

std::vector<EpochRecord> read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "epoch,loss,constraint_residual,accuracy")
        throw MalformedCsv("metrics header mismatch in '" + path + "'");
    std::vector<EpochRecord> records;
    int row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4)
            throw MalformedCsv("row " + std::to_string(row_no) + ": expected 4 columns");
        try {
            EpochRecord r;
            r.epoch = std::stoi(cells[0]);
            r.loss = std::stod(cells[1]);
            r.constraint_residual = std::stod(cells[2]);
            r.accuracy = std::stod(cells[3]);
            records.push_back(r);
        } catch (const std::exception&) {
            throw MalformedCsv("row " + std::to_string(row_no) + ": bad number");
        }
    }
    return records;
}

void save_checkpoint(const std::vector<ParamPtr>& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint file '" + path + "'");
    for (const auto& p : params) {
        out << "param: " << p->name << " manifold: " << p->descriptor.to_string() << '\n';
        write_tensor_text(out, p->value);
    }
    if (!out) throw IoError("failed writing checkpoint file '" + path + "'");
}

void load_checkpoint(const std::vector<ParamPtr>& params, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint file '" + path + "'");

    struct Section {
        manifold::ManifoldDescriptor descriptor;
        Tensor value;
    };
    std::map<std::string, Section> sections;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::string param_prefix = "param: ";
        const std::string manifold_sep = " manifold: ";
        if (line.rfind(param_prefix, 0) != 0)
            throw ParseError("checkpoint: expected a 'param:' header, got '" + line + "'");
        const auto sep = line.find(manifold_sep);
        if (sep == std::string::npos)
            throw ParseError("checkpoint: header missing 'manifold:' in '" + line + "'");
        std::string name = line.substr(param_prefix.size(), sep - param_prefix.size());
        std::string desc = line.substr(sep + manifold_sep.size());
        Section s;
        s.descriptor = manifold::ManifoldDescriptor::parse(desc);
        s.value = read_tensor_text(in);
        if (!sections.emplace(name, std::move(s)).second)
            throw ParseError("checkpoint: duplicate parameter '" + name + "'");
    }

    for (const auto& p : params) {
        auto it = sections.find(p->name);
        if (it == sections.end())
            throw ValidationError("checkpoint: missing parameter '" + p->name + "'");
        if (!(it->second.descriptor == p->descriptor))
            throw ValidationError("checkpoint: manifold mismatch for '" + p->name + "': " +
                                  it->second.descriptor.to_string() + " vs " +
                                  p->descriptor.to_string());
        p->set_value(it->second.value);
        sections.erase(it);
    }
    if (!sections.empty())
        throw ValidationError("checkpoint: unexpected parameter '" + sections.begin()->first +
                              "'");
}

} // namespace rdl::cli
