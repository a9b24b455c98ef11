#pragma once

// Subcommand implementations behind tools/sdgame. Each returns an exit code
// and a JSON document; argument parsing lives in the executable.
//
// Exit codes: 0 success, 1 input error, 2 solver failure or degenerate
// outcome, 3 negative verification or oracle disagreement.

#include <chrono>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "sdg/bimatrix.hpp"
#include "sdg/events.hpp"
#include "sdg/io.hpp"
#include "sdg/random.hpp"
#include "sdg/trace.hpp"

namespace sdg::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kSolverFailure = 2, kNegative = 3 };

struct RunConfig {
  std::string input;             // game file
  std::string strategies;        // verify: strategy file
  std::optional<int> k;          // 1-based; defaults to 1
  double tol = kDefaultVerifyTol;
  int max_steps = TraceOptions{}.max_steps;
  double tmax_mult = TraceOptions{}.tmax_mult;
  std::string out;               // result / game document
  std::string trace_out;         // CSV of accepted points
  std::uint64_t seed = 0;
  int m = 2;                     // gen
  int n = 2;
  bool bimatrix = false;         // gen: emit a bimatrix game
  int samples = 10000;           // probe
  double resolution = 0.01;      // oracle, 2x2 semidefinite
  bool timing = false;           // add wall time to the result (breaks bitwise reproducibility)
};

struct CommandResult {
  int code = kOk;
  io::Json document;
  std::string diagnostic;  // one line for stderr, empty on success
};

namespace detail {

inline CommandResult input_error(const std::string& msg) {
  return {kInputError, io::Json{{"error", msg}}, msg};
}

inline void validate(const RunConfig& cfg, const SdGame& g) {
  if (cfg.k && (*cfg.k < 1 || *cfg.k > g.m())) {
    throw Error(ErrorKind::InvalidInput,
                "--k must lie in [1, " + std::to_string(g.m()) + "], got " + std::to_string(*cfg.k));
  }
  if (!(cfg.tol > 0.0)) throw Error(ErrorKind::InvalidInput, "--tol must be positive");
  if (cfg.max_steps < 1) throw Error(ErrorKind::InvalidInput, "--max-steps must be positive");
  if (!(cfg.tmax_mult > 1.0)) throw Error(ErrorKind::InvalidInput, "--tmax-mult must exceed 1");
}

inline TraceOptions trace_options(const RunConfig& cfg) {
  TraceOptions opt;
  opt.max_steps = cfg.max_steps;
  opt.tmax_mult = cfg.tmax_mult;
  opt.verify_tol = cfg.tol;
  return opt;
}

inline int trace_exit_code(const Trace& tr) {
  return tr.outcome == TraceOutcome::Equilibrium ? kOk : kSolverFailure;
}

inline double strategy_distance(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Traces from strategy k and reports the outcome. Exit 0 only for a verified,
/// isolated equilibrium.
inline CommandResult cmd_solve(const RunConfig& cfg) {
  io::GameDocument doc;
  try {
    doc = io::read_game(cfg.input);
    detail::validate(cfg, doc.game);
  } catch (const Error& e) {
    return detail::input_error(e.what());
  }
  const auto start = std::chrono::steady_clock::now();
  const Trace tr = trace_path(doc.game, cfg.k.value_or(1) - 1, detail::trace_options(cfg));
  std::optional<double> wall;
  if (cfg.timing) {
    wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  CommandResult res;
  res.document = io::result_json(doc.game, tr, wall);
  res.code = detail::trace_exit_code(tr);
  if (res.code != kOk) res.diagnostic = std::string(to_string(tr.outcome)) + ": " + tr.message;
  try {
    if (!cfg.out.empty()) io::write_file(cfg.out, io::to_text(res.document));
    if (!cfg.trace_out.empty()) io::write_file(cfg.trace_out, io::trace_csv(tr));
  } catch (const Error& e) {
    return detail::input_error(e.what());
  }
  return res;
}

/// Checks a strategy pair against the equilibrium conditions.
inline CommandResult cmd_verify(const RunConfig& cfg) {
  io::GameDocument doc;
  io::StrategyPair sp;
  try {
    doc = io::read_game(cfg.input);
    detail::validate(cfg, doc.game);
    sp = io::read_strategies(cfg.strategies, doc.game);
    DensityMatrix(sp.X, doc.game.mask1);
    DensityMatrix(sp.Y, doc.game.mask2);
  } catch (const Error& e) {
    return detail::input_error(e.what());
  }
  const NashCertificate cert = verify_nash(doc.game, sp.X, sp.Y, cfg.tol);
  CommandResult res;
  res.document = {{"game", io::game_digest(doc.game)}, {"tol", cfg.tol},
                  {"certificate", io::certificate_json(cert)}};
  res.code = cert.valid ? kOk : kNegative;
  if (!cert.valid) res.diagnostic = "not an equilibrium at tolerance " + io::Json(cfg.tol).dump();
  if (!cfg.out.empty()) {
    try {
      io::write_file(cfg.out, io::to_text(res.document));
    } catch (const Error& e) {
      return detail::input_error(e.what());
    }
  }
  return res;
}

/// Bimatrix input: Lemke-Howson against the traced diagonal embedding.
/// 2x2 semidefinite input: traced equilibrium against the grid search.
inline CommandResult cmd_oracle(const RunConfig& cfg) {
  io::GameDocument doc;
  try {
    doc = io::read_game(cfg.input);
    detail::validate(cfg, doc.game);
    if (!doc.bimatrix && (doc.game.m() != 2 || doc.game.n() != 2 ||
                          doc.game.mask1 != StructureMask::FullSymmetric ||
                          doc.game.mask2 != StructureMask::FullSymmetric)) {
      throw Error(ErrorKind::InvalidInput,
                  "oracle needs a bimatrix game or a 2x2 semidefinite game with full masks");
    }
    if (!(cfg.resolution > 0.0 && cfg.resolution <= 0.5)) {
      throw Error(ErrorKind::InvalidInput, "--resolution must lie in (0, 0.5]");
    }
  } catch (const Error& e) {
    return detail::input_error(e.what());
  }
  const int k = cfg.k.value_or(1) - 1;
  CommandResult res;
  res.document["game"] = io::game_digest(doc.game);
  res.document["k"] = k + 1;
  const Trace tr = trace_path(doc.game, k, detail::trace_options(cfg));
  res.document["trace_outcome"] = std::string(to_string(tr.outcome));
  if (!tr.found_equilibrium()) {
    res.code = kSolverFailure;
    res.diagnostic = "trace did not reach an isolated equilibrium: " + tr.message;
    return res;
  }
  const Matrix& x = tr.certificate->X;
  const Matrix& y = tr.certificate->Y;

  if (doc.bimatrix) {
    res.document["oracle"] = "lemke_howson";
    LemkeHowsonResult lh;
    try {
      lh = lemke_howson(*doc.bimatrix, k);
    } catch (const Error& e) {
      res.code = kSolverFailure;
      res.diagnostic = std::string("Lemke-Howson: ") + e.what();
      return res;
    }
    const double dist = std::max((Vector(x.diagonal()) - lh.x).cwiseAbs().maxCoeff(),
                                 (Vector(y.diagonal()) - lh.y).cwiseAbs().maxCoeff());
    const int expected = expected_paired_crossings(lh);
    res.document["distance"] = dist;
    res.document["pivots"] = lh.pivots;
    res.document["paired_crossings"] = tr.paired_crossings();
    res.document["expected_crossings"] = expected;
    const bool agree = dist <= 1e-6 && tr.paired_crossings() == expected;
    res.document["agree"] = agree;
    res.code = agree ? kOk : kNegative;
    if (!agree) res.diagnostic = "trace and Lemke-Howson disagree";
    return res;
  }

  res.document["oracle"] = "grid";
  res.document["resolution"] = cfg.resolution;
  const BruteForceResult bf = brute_force_2x2_sdg(doc.game, cfg.resolution);
  res.document["clusters"] = bf.clusters.size();
  res.document["degenerate"] = bf.degenerate;
  double best = std::numeric_limits<double>::infinity();
  for (const BruteForceCluster& c : bf.clusters) {
    best = std::min(best, std::max(detail::strategy_distance(c.X, x), detail::strategy_distance(c.Y, y)));
  }
  res.document["distance"] = best;
  if (bf.degenerate) {
    res.code = kSolverFailure;
    res.diagnostic = "grid search found a non-isolated equilibrium set";
    return res;
  }
  const bool agree = best <= 1e-3;
  res.document["agree"] = agree;
  res.code = agree ? kOk : kNegative;
  if (!agree) res.diagnostic = "traced equilibrium is not among the grid clusters";
  return res;
}

/// Random game, deterministic in the seed. The document is the game file.
inline CommandResult cmd_gen(const RunConfig& cfg) {
  if (cfg.m < 1 || cfg.m > 6 || cfg.n < 1 || cfg.n > 6) {
    return detail::input_error("--m and --n must lie in [1, 6]");
  }
  Rng rng(cfg.seed);
  CommandResult res;
  if (cfg.bimatrix) {
    Matrix a(cfg.m, cfg.n);
    Matrix b(cfg.m, cfg.n);
    for (int i = 0; i < cfg.m; ++i)
      for (int j = 0; j < cfg.n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < cfg.m; ++i)
      for (int j = 0; j < cfg.n; ++j) b(i, j) = rng.uniform(-1.0, 1.0);
    res.document = io::bimatrix_json(BimatrixGame(a, b));
  } else {
    const std::size_t size = static_cast<std::size_t>(cfg.m) * cfg.m * cfg.n * cfg.n;
    std::vector<double> a(size);
    std::vector<double> b(size);
    for (double& x : a) x = rng.uniform(-1.0, 1.0);
    for (double& x : b) x = rng.uniform(-1.0, 1.0);
    res.document = io::game_json(SdGame(PayoffTensor::symmetrized(cfg.m, cfg.n, a),
                                        PayoffTensor::symmetrized(cfg.m, cfg.n, b)));
  }
  res.document["seed"] = cfg.seed;
  if (!cfg.out.empty()) {
    try {
      io::write_file(cfg.out, io::to_text(res.document));
    } catch (const Error& e) {
      return detail::input_error(e.what());
    }
  }
  return res;
}

/// Samples condition I on random strategies; with --strategies, also checks
/// strict complementarity and isolation at that pair.
inline CommandResult cmd_probe(const RunConfig& cfg) {
  io::GameDocument doc;
  std::vector<std::pair<Matrix, Matrix>> eqs;
  try {
    doc = io::read_game(cfg.input);
    if (cfg.samples < 1) throw Error(ErrorKind::InvalidInput, "--samples must be positive");
    if (!cfg.strategies.empty()) {
      const io::StrategyPair sp = io::read_strategies(cfg.strategies, doc.game);
      DensityMatrix(sp.X, doc.game.mask1);
      DensityMatrix(sp.Y, doc.game.mask2);
      eqs.emplace_back(sp.X, sp.Y);
    }
  } catch (const Error& e) {
    return detail::input_error(e.what());
  }
  const ProbeReport rep = nondegeneracy_probe(doc.game, cfg.samples, cfg.seed, eqs);
  CommandResult res;
  res.document["game"] = io::game_digest(doc.game);
  res.document["seed"] = cfg.seed;
  res.document["samples"] = rep.samples;
  res.document["condition_I_violations"] = rep.violations;
  io::Json wit = io::Json::array();
  for (const ConditionIWitness& w : rep.witnesses) {
    wit.push_back({{"player", w.player},
                   {"strategy_rank", w.strategy_rank},
                   {"top_multiplicity", w.top_multiplicity},
                   {"strategy", io::matrix_json(w.strategy)}});
  }
  res.document["witnesses"] = std::move(wit);
  bool isolated = true;
  io::Json checks = io::Json::array();
  for (const EquilibriumCheck& ec : rep.equilibria) {
    checks.push_back({{"valid", ec.valid}, {"strict", ec.strict}, {"sigma_min", ec.sigma_min},
                      {"isolated", ec.isolated}});
    isolated = isolated && ec.valid && ec.isolated;
  }
  if (!rep.equilibria.empty()) res.document["equilibria"] = std::move(checks);
  if (rep.violations > 0) {
    res.code = kNegative;
    res.diagnostic = "condition I violated on " + std::to_string(rep.violations) + " samples";
  } else if (!isolated) {
    res.code = kNegative;
    res.diagnostic = "supplied pair is not a locally isolated equilibrium";
  }
  if (!cfg.out.empty()) {
    try {
      io::write_file(cfg.out, io::to_text(res.document));
    } catch (const Error& e) {
      return detail::input_error(e.what());
    }
  }
  return res;
}

}  // namespace sdg::cli
