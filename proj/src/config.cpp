#include "rdl/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "rdl/errors.hpp"

namespace rdl::cli {

Task task_from_string(const std::string& s) {
    if (s == "mlp_classify") return Task::mlp_classify;
    if (s == "rayleigh") return Task::rayleigh;
    if (s == "karcher_mean") return Task::karcher_mean;
    throw ValidationError("task: unknown value '" + s + "'");
}

std::string to_string(Task t) {
    switch (t) {
        case Task::mlp_classify: return "mlp_classify";
        case Task::rayleigh: return "rayleigh";
        case Task::karcher_mean: return "karcher_mean";
    }
    return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adagrad") return OptimizerKind::adagrad;
    if (s == "cg" || s == "conjugate_gradient") return OptimizerKind::conjugate_gradient;
    throw ValidationError("optimizer.kind: unknown value '" + s + "'");
}

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adagrad: return "adagrad";
        case OptimizerKind::conjugate_gradient: return "conjugate_gradient";
    }
    return "?";
}

optim::Optimizer::Config RunConfig::optimizer_config() const {
    switch (optimizer) {
        case OptimizerKind::sgd: return optim::SgdConfig{lr, momentum};
        case OptimizerKind::adagrad: return optim::AdagradConfig{lr, eps};
        case OptimizerKind::conjugate_gradient: {
            optim::CgConfig c;
            c.beta_rule = beta_rule;
            return c;
        }
    }
    throw Error("optimizer_config: unreachable");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& why) {
    throw ValidationError(key + ": invalid value '" + value + "' (" + why + ")");
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) bad_value(key, value, "expected a number");
        return v;
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, "expected a number");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) bad_value(key, value, "expected an integer");
        return v;
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, "expected an integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_value(key, value, "expected true/false");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, value, "empty list entry");
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty()) bad_value(key, value, "expected a comma-separated list");
    return out;
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "task") {
        cfg.task = task_from_string(value);
    } else if (key == "dataset") {
        cfg.dataset = value;
    } else if (key == "classes") {
        cfg.classes = static_cast<int>(parse_int(key, value));
        if (cfg.classes < 0) bad_value(key, value, "must be >= 0");
    } else if (key == "arch.hidden") {
        cfg.hidden = parse_int_list(key, value);
        for (int h : cfg.hidden)
            if (h < 1) bad_value(key, value, "layer sizes must be >= 1");
    } else if (key == "arch.manifold") {
        try {
            cfg.weight_manifold = nn::manifold_request_from_string(value);
        } catch (const Error&) {
            bad_value(key, value, "expected none/stiefel/positive_definite");
        }
    } else if (key == "arch.bias") {
        cfg.bias = parse_bool(key, value);
    } else if (key == "optimizer.kind" || key == "optimizer") {
        cfg.optimizer = optimizer_kind_from_string(value);
    } else if (key == "optimizer.lr") {
        cfg.lr = parse_double(key, value);
        if (!(cfg.lr > 0)) bad_value(key, value, "must be > 0");
    } else if (key == "optimizer.momentum") {
        cfg.momentum = parse_double(key, value);
        if (cfg.momentum < 0 || cfg.momentum >= 1) bad_value(key, value, "must be in [0,1)");
    } else if (key == "optimizer.eps") {
        cfg.eps = parse_double(key, value);
        if (!(cfg.eps > 0)) bad_value(key, value, "must be > 0");
    } else if (key == "optimizer.beta_rule") {
        if (value == "fletcher_reeves") {
            cfg.beta_rule = optim::BetaRule::fletcher_reeves;
        } else if (value == "polak_ribiere_plus") {
            cfg.beta_rule = optim::BetaRule::polak_ribiere_plus;
        } else {
            bad_value(key, value, "expected fletcher_reeves/polak_ribiere_plus");
        }
    } else if (key == "epochs") {
        cfg.epochs = static_cast<int>(parse_int(key, value));
        if (cfg.epochs < 0) bad_value(key, value, "must be >= 0");
    } else if (key == "batch_size") {
        cfg.batch_size = static_cast<int>(parse_int(key, value));
        cfg.batch_size_set = true;
        if (cfg.batch_size < 1) bad_value(key, value, "must be >= 1");
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "output_dir") {
        cfg.output_dir = value;
    } else if (key == "rayleigh.n") {
        cfg.rayleigh_n = static_cast<int>(parse_int(key, value));
        if (cfg.rayleigh_n < 1) bad_value(key, value, "must be >= 1");
    } else if (key == "rayleigh.p") {
        cfg.rayleigh_p = static_cast<int>(parse_int(key, value));
        if (cfg.rayleigh_p < 1) bad_value(key, value, "must be >= 1");
    } else if (key == "karcher.n") {
        cfg.karcher_n = static_cast<int>(parse_int(key, value));
        if (cfg.karcher_n < 1) bad_value(key, value, "must be >= 1");
    } else if (key == "karcher.k") {
        cfg.karcher_k = static_cast<int>(parse_int(key, value));
        if (cfg.karcher_k < 2) bad_value(key, value, "must be >= 2");
    } else {
        throw ValidationError("unknown config key '" + key + "'");
    }
}

void validate(RunConfig& cfg) {
    if (cfg.rayleigh_n < cfg.rayleigh_p)
        throw ValidationError("rayleigh.n must be >= rayleigh.p");
    if (cfg.optimizer == OptimizerKind::conjugate_gradient && cfg.momentum != 0)
        throw ValidationError("optimizer.momentum: not a conjugate_gradient parameter");
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": expected 'key = value', got '" + stripped + "'");
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        apply_key(cfg, key, value);
    }
    validate(cfg);
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

void resolve_batch_size(RunConfig& cfg, int dataset_size) {
    if (cfg.optimizer == OptimizerKind::conjugate_gradient) {
        if (!cfg.batch_size_set) {
            cfg.batch_size = dataset_size;
        } else if (cfg.batch_size != dataset_size) {
            throw ValidationError("batch_size: conjugate_gradient runs full batch; expected " +
                                  std::to_string(dataset_size) + ", got " +
                                  std::to_string(cfg.batch_size));
        }
    }
    if (cfg.batch_size > dataset_size) {
        throw ValidationError("batch_size: " + std::to_string(cfg.batch_size) +
                              " exceeds dataset size " + std::to_string(dataset_size));
    }
}

} // namespace rdl::cli
