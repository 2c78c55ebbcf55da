// Copyright 2026 The qkdrate Authors
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

#pragma once

// JSON encoding of KeyRateProblem. Matrices are
//   {"dim": [rows, cols], "data": [[[re, im], ...], ...]}
// row-major. A problem is
//   {"dims": [...], "keymap": [M, ...],
//    "constraints": [{"op": M, "value": v}, ...],
//    "kraus": M, "p_pass": p, "retained_fraction": f,
//    "hzazb": {"mode": "explicit", "value": h}
//           | {"mode": "fano", "error_rate": e, "alphabet": k},
//    "label": "..."}
// with kraus, p_pass, retained_fraction and label optional.

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "qkdrate/entropy.hpp"
#include "qkdrate/errors.hpp"
#include "qkdrate/operator.hpp"
#include "qkdrate/problem.hpp"

namespace qkdrate {

using Json = nlohmann::json;

inline Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    data.push_back(std::move(row));
  }
  return {{"dim", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

inline const Json& require_field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) config_fail(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) config_fail(path, std::string("missing field \"") + key + "\"");
  return *it;
}

inline double read_number(const Json& j, const std::string& path) {
  if (!j.is_number()) config_fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) config_fail(path, "not finite");
  return v;
}

inline Index read_index(const Json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) config_fail(path, "expected an integer");
  const auto v = j.get<long long>();
  if (v <= 0) config_fail(path, "must be positive");
  return static_cast<Index>(v);
}

}  // namespace detail

inline Matrix matrix_from_json(const Json& j, const std::string& path) {
  const Json& dim = detail::require_field(j, "dim", path);
  if (!dim.is_array() || dim.size() != 2) detail::config_fail(path + ".dim", "expected [rows, cols]");
  const Index rows = detail::read_index(dim[0], path + ".dim[0]");
  const Index cols = detail::read_index(dim[1], path + ".dim[1]");
  const Json& data = detail::require_field(j, "data", path);
  if (!data.is_array() || static_cast<Index>(data.size()) != rows) {
    detail::config_fail(path + ".data", "expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const std::string rp = path + ".data[" + std::to_string(r) + "]";
    const Json& row = data[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) detail::config_fail(rp, "expected " + std::to_string(cols) + " entries");
    for (Index c = 0; c < cols; ++c) {
      const std::string ep = rp + "[" + std::to_string(c) + "]";
      const Json& e = row[static_cast<std::size_t>(c)];
      if (!e.is_array() || e.size() != 2) detail::config_fail(ep, "expected [re, im]");
      m(r, c) = Complex(detail::read_number(e[0], ep + "[0]"), detail::read_number(e[1], ep + "[1]"));
    }
  }
  return m;
}

inline HermitianOperator hermitian_from_json(const Json& j, const std::string& path) {
  const Matrix m = matrix_from_json(j, path);
  if (m.rows() != m.cols()) detail::config_fail(path, "operator must be square");
  try {
    return HermitianOperator(m);
  } catch (const Error& e) {
    detail::config_fail(path, e.what());
  }
}

/// Serializes a problem. hzazb is written as an explicit value.
inline Json problem_to_json(const KeyRateProblem& pr) {
  Json j;
  j["dims"] = pr.dims;
  j["keymap"] = Json::array();
  for (const auto& z : pr.keymap.elements()) j["keymap"].push_back(matrix_to_json(z.matrix()));
  j["constraints"] = Json::array();
  for (std::size_t i = 0; i < pr.constraints.size(); ++i) {
    j["constraints"].push_back({{"op", matrix_to_json(pr.constraints.op(i).matrix())}, {"value", pr.constraints.value(i)}});
  }
  if (pr.postselect) j["kraus"] = matrix_to_json(*pr.postselect);
  if (pr.p_pass) j["p_pass"] = *pr.p_pass;
  if (pr.retained_fraction) j["retained_fraction"] = *pr.retained_fraction;
  j["hzazb"] = {{"mode", "explicit"}, {"value", pr.hzazb}};
  if (!pr.label.empty()) j["label"] = pr.label;
  return j;
}

/// Parses and validates a problem; every failure is a ConfigError naming the
/// offending field.
inline KeyRateProblem problem_from_json(const Json& j) {
  KeyRateProblem pr;
  const Json& dims = detail::require_field(j, "dims", "$");
  if (!dims.is_array() || dims.empty()) detail::config_fail("$.dims", "expected a non-empty array");
  for (std::size_t i = 0; i < dims.size(); ++i) pr.dims.push_back(detail::read_index(dims[i], "$.dims[" + std::to_string(i) + "]"));
  const Index n = pr.dim();

  const Json& km = detail::require_field(j, "keymap", "$");
  if (!km.is_array() || km.empty()) detail::config_fail("$.keymap", "expected a non-empty array");
  std::vector<HermitianOperator> elements;
  for (std::size_t i = 0; i < km.size(); ++i) {
    const std::string p = "$.keymap[" + std::to_string(i) + "]";
    elements.push_back(hermitian_from_json(km[i], p));
    if (elements.back().dim() != n) detail::config_fail(p, "dimension does not match dims");
  }
  try {
    pr.keymap = KeyMapPOVM(std::move(elements));
  } catch (const Error& e) {
    detail::config_fail("$.keymap", e.what());
  }

  const Json& cons = detail::require_field(j, "constraints", "$");
  if (!cons.is_array() || cons.empty()) detail::config_fail("$.constraints", "expected a non-empty array");
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const std::string p = "$.constraints[" + std::to_string(i) + "]";
    HermitianOperator op = hermitian_from_json(detail::require_field(cons[i], "op", p), p + ".op");
    if (op.dim() != n) detail::config_fail(p + ".op", "dimension does not match dims");
    pr.constraints.add(std::move(op), detail::read_number(detail::require_field(cons[i], "value", p), p + ".value"));
  }
  try {
    pr.constraints.ensure_normalization();
  } catch (const Error& e) {
    detail::config_fail("$.constraints", e.what());
  }

  if (const auto it = j.find("kraus"); it != j.end()) pr.postselect = matrix_from_json(*it, "$.kraus");
  if (const auto it = j.find("p_pass"); it != j.end()) pr.p_pass = detail::read_number(*it, "$.p_pass");
  if (const auto it = j.find("retained_fraction"); it != j.end()) pr.retained_fraction = detail::read_number(*it, "$.retained_fraction");
  if (const auto it = j.find("label"); it != j.end() && it->is_string()) pr.label = it->get<std::string>();

  const Json& h = detail::require_field(j, "hzazb", "$");
  const Json& mode = detail::require_field(h, "mode", "$.hzazb");
  if (mode == "explicit") {
    pr.hzazb = detail::read_number(detail::require_field(h, "value", "$.hzazb"), "$.hzazb.value");
  } else if (mode == "fano") {
    const double e = detail::read_number(detail::require_field(h, "error_rate", "$.hzazb"), "$.hzazb.error_rate");
    if (!(e >= 0.0 && e <= 1.0)) detail::config_fail("$.hzazb.error_rate", "must lie in [0, 1]");
    int alphabet = static_cast<int>(pr.keymap.size());
    if (const auto it = h.find("alphabet"); it != h.end()) alphabet = static_cast<int>(detail::read_index(*it, "$.hzazb.alphabet"));
    if (alphabet < 2) detail::config_fail("$.hzazb.alphabet", "must be at least 2");
    pr.hzazb = fano_bound(e, alphabet);
  } else {
    detail::config_fail("$.hzazb.mode", "expected \"explicit\" or \"fano\"");
  }

  try {
    pr.validate();
  } catch (const Error& e) {
    detail::config_fail("$", e.what());
  }
  return pr;
}

inline KeyRateProblem problem_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  return problem_from_json(j);
}

inline KeyRateProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return problem_from_string(buf.str());
}

}  // namespace qkdrate
