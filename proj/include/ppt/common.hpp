#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppt {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline constexpr const char* kVersion = "0.3.1";

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ppt
