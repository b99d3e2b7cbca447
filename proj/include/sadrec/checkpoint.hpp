// Copyright 2026 The sadrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Text checkpoint format:
//
//   sad-v1
//   <n>
//   <m>
//   <k>
//   #XI
//   k lines of n comma-separated values
//   #H
//   k lines of m comma-separated values
//   #T
//   k lines of m comma-separated values
//
// Values are written with 17 significant digits, which round-trips doubles.

#ifndef SADREC_CHECKPOINT_HPP_
#define SADREC_CHECKPOINT_HPP_

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "sadrec/error.hpp"
#include "sadrec/model.hpp"

namespace sadrec {

inline constexpr const char* kCheckpointMagic = "sad-v1";

namespace detail {

inline void write_matrix_rows(std::ostream& os, const Matrix& matrix) {
  char buffer[40];
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", matrix(r, c));
      if (c > 0) os << ',';
      os << buffer;
    }
    os << '\n';
  }
}

inline bool next_line(std::istream& is, std::string& line, long& line_no) {
  if (!std::getline(is, line)) return false;
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline Index parse_count(std::istream& is, long& line_no, const char* what) {
  std::string line;
  if (!next_line(is, line, line_no)) {
    throw DataError(std::string("checkpoint: missing ") + what);
  }
  char* end = nullptr;
  errno = 0;
  const long long value = std::strtoll(line.c_str(), &end, 10);
  if (errno != 0 || end == line.c_str() || *end != '\0' || value < 0) {
    throw DataError("checkpoint line " + std::to_string(line_no) +
                    ": bad " + what + " '" + line + "'");
  }
  return static_cast<Index>(value);
}

inline Matrix read_matrix_section(std::istream& is, long& line_no,
                                  const std::string& tag, Index rows,
                                  Index cols) {
  std::string line;
  if (!next_line(is, line, line_no) || line != tag) {
    throw DataError("checkpoint line " + std::to_string(line_no) +
                    ": expected section " + tag);
  }
  Matrix matrix(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (!next_line(is, line, line_no)) {
      throw DataError("checkpoint: truncated section " + tag);
    }
    const char* cursor = line.c_str();
    for (Index c = 0; c < cols; ++c) {
      char* end = nullptr;
      errno = 0;
      const double value = std::strtod(cursor, &end);
      if (end == cursor || errno == ERANGE) {
        throw DataError("checkpoint line " + std::to_string(line_no) +
                        ": bad value in section " + tag);
      }
      matrix(r, c) = value;
      cursor = end;
      if (c + 1 < cols) {
        if (*cursor != ',') {
          throw DataError("checkpoint line " + std::to_string(line_no) +
                          ": expected " + std::to_string(cols) + " values");
        }
        ++cursor;
      }
    }
    if (*cursor != '\0') {
      throw DataError("checkpoint line " + std::to_string(line_no) +
                      ": trailing characters");
    }
  }
  return matrix;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const FactorModel& model) {
  os << kCheckpointMagic << '\n'
     << model.n_users() << '\n'
     << model.n_items() << '\n'
     << model.n_factors() << '\n';
  os << "#XI\n";
  detail::write_matrix_rows(os, model.user_factors());
  os << "#H\n";
  detail::write_matrix_rows(os, model.left_item_factors());
  os << "#T\n";
  detail::write_matrix_rows(os, model.right_item_factors());
}

inline FactorModel read_checkpoint(std::istream& is) {
  long line_no = 0;
  std::string line;
  if (!detail::next_line(is, line, line_no) || line != kCheckpointMagic) {
    throw DataError("checkpoint: missing 'sad-v1' header");
  }
  const Index n = detail::parse_count(is, line_no, "user count");
  const Index m = detail::parse_count(is, line_no, "item count");
  const Index k = detail::parse_count(is, line_no, "factor count");
  Matrix xi = detail::read_matrix_section(is, line_no, "#XI", k, n);
  Matrix eta = detail::read_matrix_section(is, line_no, "#H", k, m);
  Matrix tau = detail::read_matrix_section(is, line_no, "#T", k, m);
  try {
    return FactorModel(std::move(xi), std::move(eta), std::move(tau));
  } catch (const ContractError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const FactorModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, model);
  if (!os) throw DataError("failed writing " + path.string());
}

inline FactorModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(is);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace sadrec

#endif  // SADREC_CHECKPOINT_HPP_
