#include "ppt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ppt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string row_prefix(long row) { return "row " + std::to_string(row) + ": "; }

double parse_number(const std::string& s, long row, const std::string& col) {
    if (s.empty()) throw Error(row_prefix(row) + "empty field in column '" + col + "'");
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw Error(row_prefix(row) + "non-numeric value '" + s + "' in column '" + col + "'");
    if (!std::isfinite(v)) throw Error(row_prefix(row) + "non-finite value in column '" + col + "'");
    return v;
}

}  // namespace

void validate(const Dataset& ds) {
    const Index n = ds.n();
    if (n < 2) throw Error("dataset needs at least 2 rows");
    if (ds.d() < 1) throw Error("dataset needs at least one covariate");
    if (ds.X.rows() != n || ds.Z.size() != n) throw Error("dataset dimensions disagree");
    if (ds.H < 1) throw Error("group count must be positive");
    if (!ds.X.allFinite() || !ds.Y.allFinite()) throw Error("dataset contains non-finite values");
    std::vector<bool> seen(ds.H, false);
    for (Index i = 0; i < n; ++i) {
        if (ds.Z(i) < 1 || ds.Z(i) > ds.H) throw Error("group label out of range 1..H");
        seen[ds.Z(i) - 1] = true;
    }
    for (int h = 0; h < ds.H; ++h)
        if (!seen[h]) throw Error("group " + std::to_string(h + 1) + " has no rows");
}

Dataset make_dataset(MatrixXd X, VectorXd Y, const std::vector<long long>& labels) {
    if (static_cast<Index>(labels.size()) != Y.size()) throw Error("label count does not match rows");
    std::vector<long long> uniq(labels);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::map<long long, int> to_group;
    for (std::size_t k = 0; k < uniq.size(); ++k) to_group[uniq[k]] = static_cast<int>(k) + 1;

    Dataset ds;
    ds.X = std::move(X);
    ds.Y = std::move(Y);
    ds.Z.resize(ds.Y.size());
    for (std::size_t i = 0; i < labels.size(); ++i) ds.Z(i) = to_group[labels[i]];
    ds.H = static_cast<int>(uniq.size());
    ds.original_labels = uniq;
    validate(ds);
    return ds;
}

Dataset load_dataset(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);

    std::vector<std::vector<std::string>> rows;
    std::vector<long> line_no;
    std::vector<std::string> header;
    std::string line;
    long ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (has_header && header.empty()) {
            header = std::move(fields);
            continue;
        }
        rows.push_back(std::move(fields));
        line_no.push_back(ln);
    }
    if (rows.empty()) throw Error(path + ": empty file");

    const std::size_t width = has_header ? header.size() : rows.front().size();
    if (width < 3) throw Error(path + ": need at least columns x1, y, z");
    const std::size_t d = width - 2;
    std::vector<std::string> names(width);
    for (std::size_t k = 0; k < d; ++k) names[k] = "x" + std::to_string(k + 1);
    names[d] = "y";
    names[d + 1] = "z";
    if (has_header) {
        for (std::size_t k = 0; k < width; ++k)
            if (header[k] != names[k])
                throw Error("row 1: missing column '" + names[k] + "' (found '" + header[k] + "')");
    }

    const Index n = static_cast<Index>(rows.size());
    MatrixXd X(n, d);
    VectorXd Y(n);
    std::vector<long long> labels(n);
    for (Index i = 0; i < n; ++i) {
        const auto& f = rows[i];
        const long r = line_no[i];
        if (f.size() != width)
            throw Error(row_prefix(r) + "expected " + std::to_string(width) + " fields, found " +
                        std::to_string(f.size()));
        for (std::size_t k = 0; k < d; ++k) X(i, k) = parse_number(f[k], r, names[k]);
        Y(i) = parse_number(f[d], r, "y");
        const double z = parse_number(f[d + 1], r, "z");
        if (z != std::floor(z)) throw Error(row_prefix(r) + "group label must be an integer");
        if (z < 1) throw Error(row_prefix(r) + "group labels must be ≥ 1");
        labels[i] = static_cast<long long>(z);
    }
    return make_dataset(std::move(X), std::move(Y), labels);
}

GroupIndex group_index(const Dataset& ds) {
    GroupIndex g;
    g.rows.assign(ds.H, {});
    for (Index i = 0; i < ds.n(); ++i) g.rows[ds.Z(i) - 1].push_back(i);
    for (const auto& r : g.rows) g.sizes.push_back(static_cast<Index>(r.size()));
    return g;
}

std::pair<Dataset, StandardizationState> standardize(const Dataset& ds) {
    const Index n = ds.n();
    StandardizationState st;
    st.x_mean = ds.X.colwise().mean().transpose();
    st.x_sd.resize(ds.d());
    Dataset out = ds;
    for (Index k = 0; k < ds.d(); ++k) {
        const VectorXd centered = ds.X.col(k).array() - st.x_mean(k);
        const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(n - 1));
        if (!(sd > 0.0)) throw Error("column x" + std::to_string(k + 1) + " is constant");
        st.x_sd(k) = sd;
        out.X.col(k) = centered / sd;
    }
    st.y_mean = ds.Y.mean();
    const VectorXd yc = ds.Y.array() - st.y_mean;
    st.y_sd = std::sqrt(yc.squaredNorm() / static_cast<double>(n - 1));
    if (!(st.y_sd > 0.0)) throw Error("column y is constant");
    out.Y = yc / st.y_sd;
    st.applied = true;
    return {out, st};
}

Dataset unstandardize(const Dataset& ds, const StandardizationState& st) {
    if (!st.applied) return ds;
    Dataset out = ds;
    for (Index k = 0; k < ds.d(); ++k) out.X.col(k) = ds.X.col(k).array() * st.x_sd(k) + st.x_mean(k);
    out.Y = ds.Y.array() * st.y_sd + st.y_mean;
    return out;
}

VectorXd subset(const VectorXd& v, const std::vector<Index>& idx) {
    VectorXd out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
    return out;
}

MatrixXd subset_rows(const MatrixXd& m, const std::vector<Index>& idx) {
    MatrixXd out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
    return out;
}

MatrixXd subset_block(const MatrixXd& m, const std::vector<Index>& idx) {
    const Index k = static_cast<Index>(idx.size());
    MatrixXd out(k, k);
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) out(a, b) = m(idx[a], idx[b]);
    return out;
}

}  // namespace ppt
