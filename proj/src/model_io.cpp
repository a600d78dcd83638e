#include "isloss/model_io.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "isloss/format.hpp"

namespace isloss {

namespace {

constexpr const char* kHeader = "isloss-model v1";

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << format_number(m(r, c), 17);
        os << '\n';
    }
}

Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            if (!(is >> m(r, c))) throw std::runtime_error("model file truncated");
    return m;
}

}  // namespace

void write_model(std::ostream& os, const ModelParams& model) {
    os << kHeader << '\n'
       << model.input_dim() << ' ' << model.embedding_dim() << ' ' << model.classes() << '\n';
    write_matrix(os, model.projection);
    write_matrix(os, model.class_weights.matrix);
}

ModelParams read_model(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header != kHeader)
        throw std::runtime_error("not an isloss model file (expected '" + std::string(kHeader) + "')");
    Eigen::Index d_in = 0, d = 0, k = 0;
    if (!(is >> d_in >> d >> k) || d_in < 1 || d < 1 || k < 1)
        throw std::runtime_error("model file has invalid dimensions");
    ModelParams m;
    m.projection = read_matrix(is, d_in, d);
    m.class_weights.matrix = read_matrix(is, d, k);
    std::string trailing;
    if (is >> trailing) throw std::runtime_error("model file has trailing data");
    if (!m.projection.allFinite() || !m.class_weights.matrix.allFinite())
        throw std::runtime_error("model file contains non-finite values");
    return m;
}

}  // namespace isloss
