#include "ropaws/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "ropaws/errors.hpp"
#include "ropaws/kernel_core.hpp"

namespace ropaws::data {

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

namespace {

struct Centers {
    std::vector<std::pair<double, double>> in_class;
    std::vector<std::pair<double, double>> ood;
};

// In-class clusters on a ring, OOD clusters interleaved between them.
Centers ring_centers(const GenSpec& spec) {
    const std::size_t k = spec.classes + spec.ood_clusters;
    const double half_angle = std::numbers::pi / static_cast<double>(k > 1 ? k : 2);
    const double radius = spec.separation * spec.noise_std / (2.0 * std::sin(half_angle));

    // Spread the in-class clusters evenly over the ring positions.
    std::vector<bool> is_in(k, false);
    for (std::size_t c = 0; c < spec.classes; ++c)
        is_in[(c * k) / spec.classes] = true;

    Centers centers;
    for (std::size_t i = 0; i < k; ++i) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
        const auto pt = std::make_pair(radius * std::cos(angle), radius * std::sin(angle));
        if (is_in[i])
            centers.in_class.push_back(pt);
        else
            centers.ood.push_back(pt);
    }
    return centers;
}

Centers moon_centers(const GenSpec& spec) {
    if (spec.classes != 2)
        throw ParameterError("two-moons generator requires classes = 2");
    Centers centers;
    for (std::size_t i = 0; i < spec.ood_clusters; ++i) {
        const double angle =
            2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(spec.ood_clusters);
        centers.ood.emplace_back(0.5 + 2.5 * std::cos(angle), 0.25 + 2.5 * std::sin(angle));
    }
    return centers;
}

}  // namespace

Dataset generate(const GenSpec& spec) {
    if (spec.classes == 0) throw ParameterError("generate: classes must be positive");
    if (spec.unlabeled_ood > 0 && spec.ood_clusters == 0)
        throw ParameterError("generate: OOD samples requested without OOD clusters");
    const bool moons = spec.generator == "two-moons";
    if (!moons && spec.generator != "gaussian-mixture")
        throw ParameterError("generate: unknown generator '" + spec.generator + "'");

    const Centers centers = moons ? moon_centers(spec) : ring_centers(spec);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    std::uniform_real_distribution<double> arc(0.0, std::numbers::pi);

    Dataset ds;
    ds.class_count = spec.classes;
    const std::size_t total = spec.classes * spec.labels_per_class + spec.unlabeled_in +
                              spec.unlabeled_ood + spec.test_count;
    ds.inputs = Matrix(total, 2);
    ds.true_class.reserve(total);
    ds.split.reserve(total);

    std::size_t row = 0;
    auto emit_in = [&](std::size_t cls, Split s) {
        if (moons) {
            const double t = arc(rng);
            if (cls == 0) {
                ds.inputs(row, 0) = std::cos(t) + noise(rng);
                ds.inputs(row, 1) = std::sin(t) + noise(rng);
            } else {
                ds.inputs(row, 0) = 1.0 - std::cos(t) + noise(rng);
                ds.inputs(row, 1) = 0.5 - std::sin(t) + noise(rng);
            }
        } else {
            const auto [cx, cy] = centers.in_class[cls];
            ds.inputs(row, 0) = cx + noise(rng);
            ds.inputs(row, 1) = cy + noise(rng);
        }
        ds.true_class.push_back(static_cast<int>(cls));
        ds.split.push_back(s);
        ++row;
    };
    auto emit_ood = [&](std::size_t cluster) {
        const auto [cx, cy] = centers.ood[cluster];
        ds.inputs(row, 0) = cx + noise(rng);
        ds.inputs(row, 1) = cy + noise(rng);
        ds.true_class.push_back(kOodMarker);
        ds.split.push_back(Split::UnlabeledOod);
        ++row;
    };

    for (std::size_t c = 0; c < spec.classes; ++c)
        for (std::size_t i = 0; i < spec.labels_per_class; ++i) emit_in(c, Split::Labeled);
    for (std::size_t i = 0; i < spec.unlabeled_in; ++i)
        emit_in(i % spec.classes, Split::UnlabeledIn);
    for (std::size_t i = 0; i < spec.unlabeled_ood; ++i) emit_ood(i % spec.ood_clusters);
    for (std::size_t i = 0; i < spec.test_count; ++i) emit_in(i % spec.classes, Split::Test);
    return ds;
}

namespace {

void write_rows(const Dataset& ds, const std::vector<std::size_t>& rows, bool expose_label,
                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("save_csv: cannot open " + path);
    out << "id,label,ood";
    for (std::size_t j = 0; j < ds.dim(); ++j) out << ",z" << j;
    out << '\n';
    char buf[64];
    for (const std::size_t i : rows) {
        const bool ood = ds.split[i] == Split::UnlabeledOod;
        const bool labeled = ds.split[i] == Split::Labeled || ds.split[i] == Split::Test;
        const int label = (labeled || expose_label) && !ood ? ds.true_class[i] : -1;
        out << i << ',' << label << ',' << (ood ? 1 : 0);
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.inputs(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace

void save_csv(const Dataset& ds, Split which, const std::string& path) {
    write_rows(ds, ds.indices(which), which == Split::Test, path);
}

void save_csv(const Dataset& ds, const std::string& data_path, const std::string& test_path) {
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < ds.count(); ++i)
        if (ds.split[i] != Split::Test) train_rows.push_back(i);
    write_rows(ds, train_rows, false, data_path);
    write_rows(ds, ds.indices(Split::Test), true, test_path);
}

namespace {

struct ParsedCsv {
    Matrix values;
    std::vector<int> labels;
    std::vector<int> ood;
};

ParsedCsv parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("load: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("load: empty file " + path);
    // Header: id,label,ood,z0,...
    std::size_t dim = 0;
    {
        std::istringstream hs(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(hs, col, ',')) cols.push_back(col);
        if (cols.size() < 3 || cols[0] != "id" || cols[1] != "label" || cols[2] != "ood")
            throw ValidationError("load: bad header in " + path);
        dim = cols.size() - 3;
    }

    std::vector<double> flat;
    ParsedCsv out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != dim + 3)
            throw ValidationError("load: line " + std::to_string(lineno) + " of " + path +
                                  ": expected " + std::to_string(dim + 3) + " fields, got " +
                                  std::to_string(cells.size()));
        try {
            out.labels.push_back(std::stoi(cells[1]));
            out.ood.push_back(std::stoi(cells[2]));
            for (std::size_t j = 0; j < dim; ++j) flat.push_back(std::stod(cells[3 + j]));
        } catch (const std::exception&) {
            throw ValidationError("load: malformed value at line " + std::to_string(lineno) +
                                  " of " + path);
        }
    }
    out.values = Matrix(out.labels.size(), dim);
    for (std::size_t i = 0; i < flat.size(); ++i) out.values.data()[i] = flat[i];
    return out;
}

void append_parsed(Dataset& ds, const ParsedCsv& parsed, bool as_test, std::size_t base,
                   const std::string& path) {
    for (std::size_t i = 0; i < parsed.labels.size(); ++i) {
        const int label = parsed.labels[i];
        const bool ood = parsed.ood[i] != 0;
        if (ood && label >= 0)
            throw ValidationError("load: row " + std::to_string(i) + " of " + path +
                                  " carries both a class label and the OOD flag");
        for (std::size_t j = 0; j < ds.dim(); ++j)
            ds.inputs(base + i, j) = parsed.values(i, j);
        ds.true_class.push_back(ood ? kOodMarker : label);
        if (as_test)
            ds.split.push_back(Split::Test);
        else if (ood)
            ds.split.push_back(Split::UnlabeledOod);
        else if (label >= 0)
            ds.split.push_back(Split::Labeled);
        else
            ds.split.push_back(Split::UnlabeledIn);
        if (label >= 0 && static_cast<std::size_t>(label) + 1 > ds.class_count)
            ds.class_count = static_cast<std::size_t>(label) + 1;
    }
}

}  // namespace

Dataset load_dataset(const std::string& data_path, const std::string& test_path) {
    const ParsedCsv train = parse_csv(data_path);
    ParsedCsv test;
    if (!test_path.empty()) test = parse_csv(test_path);
    if (!test_path.empty() && test.values.rows() > 0 && train.values.rows() > 0 &&
        test.values.cols() != train.values.cols())
        throw ValidationError("load_dataset: dimension mismatch between " + data_path + " and " +
                              test_path);

    Dataset ds;
    const std::size_t dim = train.values.rows() > 0 ? train.values.cols() : test.values.cols();
    ds.inputs = Matrix(train.values.rows() + test.values.rows(), dim);
    append_parsed(ds, train, false, 0, data_path);
    append_parsed(ds, test, true, train.values.rows(), test_path);
    return ds;
}

Dataset load_embeddings(const std::string& path) {
    Dataset ds = load_dataset(path);
    if (ds.count() > 0)
        ds.inputs = kernel::EmbeddingBatch::normalized(std::move(ds.inputs)).z;
    return ds;
}

}  // namespace ropaws::data
