#ifndef CFSM_LIBSVM_HPP
#define CFSM_LIBSVM_HPP

#include <iosfwd>
#include <string>

#include "cfsm/problems.hpp"

namespace cfsm {

/// Dense view of a LIBSVM file: row j holds a_j, targets(j) the label b_j.
struct LibsvmData {
  RowMatrixX<double> rows;
  Eigen::VectorXd targets;
  Eigen::Index dimension = 0;
};

/// Parses `label idx:val idx:val ...` lines with 1-based indices. The
/// dimension is the largest index seen, or `min_dimension` if that is larger.
/// Blank lines and `#` comments are skipped. Throws ParseError with the line number.
LibsvmData parse_libsvm(std::istream& in, Eigen::Index min_dimension = 0);
LibsvmData parse_libsvm_file(const std::string& path, Eigen::Index min_dimension = 0);

/// Writes rows back out, skipping zero entries; values round-trip exactly.
void write_libsvm(std::ostream& out, const RowMatrixX<double>& rows, const Eigen::VectorXd& targets);

}  // namespace cfsm

#endif  // CFSM_LIBSVM_HPP
