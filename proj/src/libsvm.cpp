#include "cfsm/libsvm.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>
#include <utility>
#include <vector>

#include "cfsm/format.hpp"

namespace cfsm {

namespace {

bool parse_number(std::string_view token, double& value) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
  return result.ec == std::errc() && result.ptr == token.data() + token.size();
}

bool parse_index(std::string_view token, long long& value) {
  const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
  return result.ec == std::errc() && result.ptr == token.data() + token.size();
}

struct ParsedRow {
  double label = 0.0;
  std::vector<std::pair<Eigen::Index, double>> entries;
};

}  // namespace

LibsvmData parse_libsvm(std::istream& in, Eigen::Index min_dimension) {
  std::vector<ParsedRow> parsed;
  Eigen::Index dimension = min_dimension;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token)) continue;

    ParsedRow row;
    if (!parse_number(token, row.label)) throw ParseError(line_number, "nonnumeric label '" + token + "'");
    std::set<Eigen::Index> seen;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) throw ParseError(line_number, "expected idx:val, got '" + token + "'");
      const std::string_view view(token);
      long long index = 0;
      double value = 0.0;
      if (!parse_index(view.substr(0, colon), index))
        throw ParseError(line_number, "nonnumeric index in '" + token + "'");
      if (index <= 0) throw ParseError(line_number, "nonpositive index " + std::to_string(index));
      if (!parse_number(view.substr(colon + 1), value))
        throw ParseError(line_number, "nonnumeric value in '" + token + "'");
      if (!seen.insert(index).second) throw ParseError(line_number, "duplicate index " + std::to_string(index));
      row.entries.emplace_back(static_cast<Eigen::Index>(index), value);
      dimension = std::max<Eigen::Index>(dimension, index);
    }
    parsed.push_back(std::move(row));
  }
  if (parsed.empty()) throw ParseError(line_number, "no data rows");
  if (dimension == 0) dimension = 1;

  LibsvmData data;
  data.dimension = dimension;
  data.rows = RowMatrixX<double>::Zero(static_cast<Eigen::Index>(parsed.size()), dimension);
  data.targets.resize(static_cast<Eigen::Index>(parsed.size()));
  for (std::size_t j = 0; j < parsed.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    data.targets(r) = parsed[j].label;
    for (const auto& [index, value] : parsed[j].entries) data.rows(r, index - 1) = value;
  }
  return data;
}

LibsvmData parse_libsvm_file(const std::string& path, Eigen::Index min_dimension) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return parse_libsvm(in, min_dimension);
}

void write_libsvm(std::ostream& out, const RowMatrixX<double>& rows, const Eigen::VectorXd& targets) {
  if (targets.size() != rows.rows()) throw InvalidInput("write_libsvm: one target per row");
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    out << format_double(targets(j));
    for (Eigen::Index k = 0; k < rows.cols(); ++k)
      if (rows(j, k) != 0.0) out << ' ' << (k + 1) << ':' << format_double(rows(j, k));
    out << '\n';
  }
}

}  // namespace cfsm
