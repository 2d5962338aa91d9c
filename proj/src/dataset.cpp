#include "rdl/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rdl/errors.hpp"

namespace rdl::cli {

namespace {

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

bool parse_synthetic_spec(const std::string& s, int& clusters, int& dim, int& n) {
    std::string t = strip(s);
    const std::string prefix = "synthetic(";
    if (t.rfind(prefix, 0) != 0 || t.back() != ')') return false;
    std::string body = t.substr(prefix.size(), t.size() - prefix.size() - 1);
    std::stringstream ss(body);
    std::string item;
    std::vector<int> vals;
    while (std::getline(ss, item, ',')) {
        item = strip(item);
        try {
            std::size_t pos = 0;
            vals.push_back(std::stoi(item, &pos));
            if (pos != item.size()) return false;
        } catch (const std::exception&) {
            return false;
        }
    }
    if (vals.size() != 3) return false;
    clusters = vals[0];
    dim = vals[1];
    n = vals[2];
    return true;
}

Dataset make_synthetic(int clusters, int dim, int n, Rng& rng) {
    if (clusters < 2) throw ValidationError("synthetic: clusters must be >= 2");
    if (dim < 1) throw ValidationError("synthetic: dim must be >= 1");
    if (n < clusters) throw ValidationError("synthetic: n must be >= clusters");

    constexpr double min_separation = 6.0;
    std::vector<Tensor> means;
    int attempts = 0;
    while (static_cast<int>(means.size()) < clusters) {
        if (++attempts > 100000)
            throw Error("synthetic: could not place separated cluster means");
        Tensor candidate({dim});
        for (int i = 0; i < dim; ++i) candidate[i] = 3.0 * rng.gaussian();
        bool ok = true;
        for (const Tensor& m : means) {
            if (frobenius_norm(sub(candidate, m)) < min_separation) {
                ok = false;
                break;
            }
        }
        if (ok) means.push_back(std::move(candidate));
    }

    Dataset ds;
    ds.classes = clusters;
    ds.features = Tensor({n, dim});
    ds.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int c = i % clusters;
        ds.labels[static_cast<std::size_t>(i)] = c;
        for (int j = 0; j < dim; ++j) ds.features(i, j) = means[static_cast<std::size_t>(c)][j] + rng.gaussian();
    }
    return ds;
}

Dataset load_csv(const std::string& path, int classes) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file '" + path + "'");

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    int row_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++row_no;
        std::string stripped = strip(line);
        if (stripped.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(stripped);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(strip(cell));
        if (cells.size() < 2) {
            throw MalformedCsv("row " + std::to_string(row_no) +
                               ": need at least one feature and a label");
        }
        if (width == 0) {
            width = cells.size();
        } else if (cells.size() != width) {
            throw MalformedCsv("row " + std::to_string(row_no) + ": expected " +
                               std::to_string(width) + " columns, got " +
                               std::to_string(cells.size()));
        }
        std::vector<double> feats;
        feats.reserve(cells.size() - 1);
        for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
            try {
                std::size_t pos = 0;
                feats.push_back(std::stod(cells[i], &pos));
                if (pos != cells[i].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw MalformedCsv("row " + std::to_string(row_no) + ": bad float '" + cells[i] +
                                   "'");
            }
        }
        int label = 0;
        try {
            std::size_t pos = 0;
            label = std::stoi(cells.back(), &pos);
            if (pos != cells.back().size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw MalformedCsv("row " + std::to_string(row_no) + ": bad label '" + cells.back() +
                               "'");
        }
        rows.push_back(std::move(feats));
        labels.push_back(label);
    }
    if (rows.empty()) throw MalformedCsv("dataset '" + path + "' has no rows");

    const int n = static_cast<int>(rows.size());
    const int d = static_cast<int>(width) - 1;
    int max_label = *std::max_element(labels.begin(), labels.end());
    int min_label = *std::min_element(labels.begin(), labels.end());
    if (min_label < 0) throw LabelOutOfRange("negative label " + std::to_string(min_label));
    const int resolved = classes > 0 ? classes : max_label + 1;
    if (max_label >= resolved) {
        throw LabelOutOfRange("label " + std::to_string(max_label) + " outside [0, " +
                              std::to_string(resolved) + ")");
    }

    Dataset ds;
    ds.classes = resolved;
    ds.labels = std::move(labels);
    ds.features = Tensor({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) ds.features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return ds;
}

Dataset load_dataset(const std::string& spec, int classes, Rng& rng) {
    int c = 0, d = 0, n = 0;
    if (parse_synthetic_spec(spec, c, d, n)) {
        Dataset ds = make_synthetic(c, d, n, rng);
        if (classes > 0 && classes != c) {
            throw ValidationError("classes: synthetic dataset has " + std::to_string(c) +
                                  " clusters, config says " + std::to_string(classes));
        }
        return ds;
    }
    return load_csv(spec, classes);
}

} // namespace rdl::cli
