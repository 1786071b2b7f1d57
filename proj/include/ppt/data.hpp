#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ppt/common.hpp"

namespace ppt {

/// Covariates X (n x d), responses Y and group labels Z in 1..H.
struct Dataset {
    MatrixXd X;
    VectorXd Y;
    VectorXi Z;
    int H = 1;
    // original_labels[h-1] is the label that was remapped to h.
    std::vector<long long> original_labels;

    Index n() const { return Y.size(); }
    Index d() const { return X.cols(); }
};

/// Throws if the dataset violates its invariants.
void validate(const Dataset& ds);

/// Builds a dataset from raw labels, remapping them to 1..H in sorted order.
Dataset make_dataset(MatrixXd X, VectorXd Y, const std::vector<long long>& labels);

Dataset load_dataset(const std::string& path, bool has_header = true);

struct GroupIndex {
    std::vector<std::vector<Index>> rows;  // 0-based, sorted
    std::vector<Index> sizes;

    int H() const { return static_cast<int>(rows.size()); }
};

GroupIndex group_index(const Dataset& ds);

struct StandardizationState {
    VectorXd x_mean;
    VectorXd x_sd;
    double y_mean = 0.0;
    double y_sd = 1.0;
    bool applied = false;
};

std::pair<Dataset, StandardizationState> standardize(const Dataset& ds);
Dataset unstandardize(const Dataset& ds, const StandardizationState& st);

/// Rows of v (or of matrix rows) selected by idx.
VectorXd subset(const VectorXd& v, const std::vector<Index>& idx);
MatrixXd subset_rows(const MatrixXd& m, const std::vector<Index>& idx);
MatrixXd subset_block(const MatrixXd& m, const std::vector<Index>& idx);

}  // namespace ppt
