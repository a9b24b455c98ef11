#pragma once

// File formats: games and strategies as JSON, result summaries as JSON,
// traces as CSV. Doubles are written so that they read back bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdg/bimatrix.hpp"
#include "sdg/error.hpp"
#include "sdg/game.hpp"
#include "sdg/trace.hpp"

namespace sdg::io {

using Json = nlohmann::json;

/// A parsed game file. `bimatrix` is set when the file holds a bimatrix game;
/// `game` is then its diagonal embedding.
struct GameDocument {
  SdGame game;
  std::optional<BimatrixGame> bimatrix;
};

struct StrategyPair {
  Matrix X;
  Matrix Y;
};

namespace detail {

[[noreturn]] inline void fail_at(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::InvalidInput, where + ": " + what);
}

inline std::string child(const std::string& where, const std::string& key) {
  return where + "/" + key;
}
inline std::string child(const std::string& where, std::size_t i) {
  return where + "/" + std::to_string(i);
}

inline const Json& field(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) fail_at(where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail_at(where, "missing key \"" + key + "\"");
  return *it;
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail_at(where, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) fail_at(where, "number is not finite");
  return x;
}

inline int positive_int(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 1 || j.get<long long>() > 64) {
    fail_at(where, "expected an integer in [1, 64]");
  }
  return j.get<int>();
}

inline const Json& array_of(const Json& j, std::size_t len, const std::string& where) {
  if (!j.is_array()) fail_at(where, "expected an array");
  if (j.size() != len) {
    fail_at(where, "expected " + std::to_string(len) + " entries, found " + std::to_string(j.size()));
  }
  return j;
}

inline Matrix matrix(const Json& j, int rows, int cols, const std::string& where) {
  array_of(j, static_cast<std::size_t>(rows), where);
  Matrix out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const std::string wr = child(where, static_cast<std::size_t>(r));
    const Json& row = array_of(j[static_cast<std::size_t>(r)], static_cast<std::size_t>(cols), wr);
    for (int c = 0; c < cols; ++c) {
      out(r, c) = number(row[static_cast<std::size_t>(c)], child(wr, static_cast<std::size_t>(c)));
    }
  }
  return out;
}

/// Matrix whose shape is taken from the outer array and its first row.
inline Matrix rect_matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail_at(where, "expected a non-empty array of rows");
  if (!j[0].is_array() || j[0].empty()) fail_at(child(where, std::size_t{0}), "expected a non-empty row");
  return matrix(j, static_cast<int>(j.size()), static_cast<int>(j[0].size()), where);
}

inline PayoffTensor tensor(const Json& j, int m, int n, const std::string& where) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m) * m * n * n);
  array_of(j, static_cast<std::size_t>(m), where);
  for (int i = 0; i < m; ++i) {
    const std::string wi = child(where, static_cast<std::size_t>(i));
    array_of(j[static_cast<std::size_t>(i)], static_cast<std::size_t>(m), wi);
    for (int k = 0; k < m; ++k) {
      const std::string wk = child(wi, static_cast<std::size_t>(k));
      const Matrix s = matrix(j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)], n, n, wk);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) data.push_back(s(r, c));
    }
  }
  try {
    return PayoffTensor(m, n, std::move(data));
  } catch (const Error& e) {
    fail_at(where, e.what());
  }
}

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}


// Pretty printer that keeps vectors and matrices on one line.
inline void emit(std::ostream& os, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
  if (j.is_array()) {
    auto scalar_row = [](const Json& e) {
      return e.is_array() && std::none_of(e.begin(), e.end(), [](const Json& x) { return x.is_structured(); });
    };
    const bool flat = std::all_of(j.begin(), j.end(), [&](const Json& e) {
      return !e.is_structured() || scalar_row(e);
    });
    if (flat) {
      os << j.dump();
      return;
    }
    os << "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      os << inner;
      emit(os, j[i], indent + 2);
      os << (i + 1 < j.size() ? ",\n" : "\n");
    }
    os << pad << ']';
    return;
  }
  if (j.is_object()) {
    if (j.empty()) {
      os << "{}";
      return;
    }
    os << "{\n";
    std::size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
      os << inner << Json(it.key()).dump() << ": ";
      emit(os, it.value(), indent + 2);
      os << (i + 1 < j.size() ? ",\n" : "\n");
    }
    os << pad << '}';
    return;
  }
  os << j.dump();
}

}  // namespace detail

inline std::string to_text(const Json& j) {
  std::ostringstream os;
  detail::emit(os, j, 0);
  os << '\n';
  return os.str();
}

/// Parses JSON text, reporting syntax errors by line and column.
inline Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    throw Error(ErrorKind::InvalidInput, source + ":" + std::to_string(line) + ":" +
                                             std::to_string(col) + ": malformed JSON (" +
                                             e.what() + ")");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidInput, path + ": cannot open file for writing");
  out << text;
  if (!out) throw Error(ErrorKind::InvalidInput, path + ": write failed");
}

inline Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json tensor_json(const PayoffTensor& t) {
  Json out = Json::array();
  for (int i = 0; i < t.m(); ++i) {
    Json row = Json::array();
    for (int k = 0; k < t.m(); ++k) row.push_back(matrix_json(t.slice(i, k)));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json game_json(const SdGame& g) {
  Json j;
  j["format"] = "sdgame";
  j["m"] = g.m();
  j["n"] = g.n();
  j["mask1"] = std::string(to_string(g.mask1));
  j["mask2"] = std::string(to_string(g.mask2));
  j["A"] = tensor_json(g.A);
  j["B"] = tensor_json(g.B);
  return j;
}

inline Json bimatrix_json(const BimatrixGame& g) {
  Json j;
  j["format"] = "bimatrix";
  j["A"] = matrix_json(g.A);
  j["B"] = matrix_json(g.B);
  return j;
}

inline GameDocument parse_game(const Json& j, const std::string& source = "game") {
  using detail::field;
  const std::string root = source + ":";
  if (!j.is_object()) detail::fail_at(root, "expected an object at top level");
  const std::string format =
      j.contains("format") && j["format"].is_string() ? j["format"].get<std::string>() : "";
  GameDocument doc;
  if (format == "bimatrix") {
    const Json& ja = field(j, "A", root);
    const Matrix a = detail::rect_matrix(ja, root + "/A");
    const Matrix b = detail::matrix(field(j, "B", root), static_cast<int>(a.rows()),
                                    static_cast<int>(a.cols()), root + "/B");
    doc.bimatrix = BimatrixGame(a, b);
    doc.game = embed_diagonal(*doc.bimatrix);
    return doc;
  }
  if (format != "sdgame") detail::fail_at(root + "/format", "expected \"sdgame\" or \"bimatrix\"");
  const int m = detail::positive_int(field(j, "m", root), root + "/m");
  const int n = detail::positive_int(field(j, "n", root), root + "/n");
  auto mask = [&](const char* key) {
    if (!j.contains(key)) return StructureMask::FullSymmetric;
    const std::string where = root + "/" + key;
    if (!j[key].is_string()) detail::fail_at(where, "expected a string");
    try {
      return parse_mask(j[key].get<std::string>());
    } catch (const Error& e) {
      detail::fail_at(where, e.what());
    }
  };
  const StructureMask m1 = mask("mask1");
  const StructureMask m2 = mask("mask2");
  PayoffTensor a = detail::tensor(field(j, "A", root), m, n, root + "/A");
  PayoffTensor b = detail::tensor(field(j, "B", root), m, n, root + "/B");
  doc.game = SdGame(std::move(a), std::move(b), m1, m2);
  return doc;
}

inline GameDocument read_game(const std::string& path) {
  return parse_game(parse_text(read_file(path), path), path);
}

/// Strategy file: {"X": [[...]], "Y": [[...]]}. Shapes must match the game;
/// density-matrix validity is checked by the caller.
inline StrategyPair parse_strategies(const Json& j, const SdGame& g, const std::string& source) {
  const std::string root = source + ":";
  StrategyPair sp;
  sp.X = detail::matrix(detail::field(j, "X", root), g.m(), g.m(), root + "/X");
  sp.Y = detail::matrix(detail::field(j, "Y", root), g.n(), g.n(), root + "/Y");
  return sp;
}

inline StrategyPair read_strategies(const std::string& path, const SdGame& g) {
  return parse_strategies(parse_text(read_file(path), path), g, path);
}

inline Json strategies_json(const Matrix& x, const Matrix& y) {
  Json j;
  j["X"] = matrix_json(x);
  j["Y"] = matrix_json(y);
  return j;
}

/// 64-bit FNV-1a over dimensions, masks and the raw tensor bytes.
inline std::uint64_t game_hash(const SdGame& g) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int32_t dims[4] = {g.m(), g.n(), static_cast<std::int32_t>(g.mask1),
                                static_cast<std::int32_t>(g.mask2)};
  feed(dims, sizeof dims);
  for (const PayoffTensor* t : {&g.A, &g.B}) {
    for (double x : t->data()) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &x, sizeof bits);
      feed(&bits, sizeof bits);
    }
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline Json game_digest(const SdGame& g) {
  Json j;
  j["m"] = g.m();
  j["n"] = g.n();
  j["mask1"] = std::string(to_string(g.mask1));
  j["mask2"] = std::string(to_string(g.mask2));
  j["fnv1a64"] = hex64(game_hash(g));
  return j;
}

inline Json certificate_json(const NashCertificate& c) {
  Json j;
  j["valid"] = c.valid;
  j["strict"] = c.strict;
  j["X"] = matrix_json(c.X);
  j["Y"] = matrix_json(c.Y);
  j["w"] = c.w;
  j["v"] = c.v;
  j["min_eig_W"] = c.residuals.min_eig_W;
  j["min_eig_V"] = c.residuals.min_eig_V;
  j["inner_XW"] = c.residuals.inner_XW;
  j["inner_YV"] = c.residuals.inner_YV;
  return j;
}

inline Json event_json(const EventRecord& e) {
  Json j;
  j["kind"] = std::string(to_string(e.kind));
  j["t"] = e.t_star;
  j["step"] = e.step;
  if (e.kind == EventKind::PairedCrossing) {
    j["player"] = e.player;
    j["pair"] = e.index + 1;
    j["vanishing"] = e.crossing_member == Member::Strategy ? "strategy" : "slack";
    j["minors_certified"] = e.minors_certified;
    if (e.puiseux) {
      j["puiseux"] = {{"exponent", std::to_string(e.puiseux->exponent.num) + "/" +
                                       std::to_string(e.puiseux->exponent.den)},
                      {"coefficient", e.puiseux->coefficient},
                      {"log_residual", e.puiseux->log_residual}};
    }
  }
  return j;
}

/// Summary of a solve run. `k` is reported 1-based.
inline Json result_json(const SdGame& g, const Trace& tr, std::optional<double> wall_seconds = {}) {
  Json j;
  j["game"] = game_digest(g);
  j["k"] = tr.k + 1;
  j["outcome"] = std::string(to_string(tr.outcome));
  j["message"] = tr.message;
  j["t0"] = tr.t0;
  j["steps"] = tr.steps;
  j["accepted_points"] = tr.points.size();
  j["paired_crossings"] = tr.paired_crossings();
  Json ev = Json::array();
  for (const EventRecord& e : tr.events) ev.push_back(event_json(e));
  j["events"] = std::move(ev);
  if (tr.certificate) j["certificate"] = certificate_json(*tr.certificate);
  if (wall_seconds) j["wall_time_s"] = *wall_seconds;
  return j;
}

inline std::string flags_text(const std::vector<PairFlag>& flags) {
  std::string s;
  for (PairFlag f : flags) s += f == PairFlag::StrategyZero ? 'S' : 'L';
  return s;
}

/// One line per accepted point. Matrix columns hold the upper triangle, row
/// by row; the active-set columns mark each pair by the member that is zero
/// (S strategy, L slack).
inline std::string trace_csv(const Trace& tr) {
  std::ostringstream os;
  os << std::setprecision(17);
  const int m = tr.points.empty() ? 0 : static_cast<int>(tr.points.front().X.rows());
  const int n = tr.points.empty() ? 0 : static_cast<int>(tr.points.front().Y.rows());
  os << "index,step,t,w,v,residual,sigma_min,active1,active2";
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) os << ",x" << i + 1 << j + 1;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) os << ",y" << i + 1 << j + 1;
  os << '\n';
  for (std::size_t p = 0; p < tr.points.size(); ++p) {
    const PathPoint& pt = tr.points[p];
    os << p << ',' << tr.point_steps[p] << ',' << pt.t << ',' << pt.w << ',' << pt.v << ','
       << pt.residual_norm << ',' << tr.sigma_min[p] << ',' << flags_text(pt.active.player1) << ','
       << flags_text(pt.active.player2);
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) os << ',' << pt.X(i, j);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) os << ',' << pt.Y(i, j);
    os << '\n';
  }
  return os.str();
}

}  // namespace sdg::io
