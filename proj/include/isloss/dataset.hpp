#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace isloss {

/// Raw inputs (n x d_in) with dense class labels in [0, classes).
struct LabeledDataset {
    std::string name;
    Eigen::MatrixXd inputs;
    std::vector<int> labels;
    int classes = 0;
    Eigen::MatrixXd centers;  // classes x d_in ground truth, when known

    Eigen::Index size() const { return inputs.rows(); }
    Eigen::Index input_dim() const { return inputs.cols(); }
};

}  // namespace isloss
