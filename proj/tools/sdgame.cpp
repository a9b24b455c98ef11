// Command-line front end. See README.md for the file formats.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sdg/cli.hpp"

int main(int argc, char** argv) {
  using namespace sdg::cli;
  CLI::App app{"Nash equilibria of semidefinite games by homotopy path tracing"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--tol", cfg.tol, "verification tolerance");
    sub->add_option("--out", cfg.out, "write the JSON result here instead of stdout");
  };
  auto add_trace = [&](CLI::App* sub) {
    sub->add_option("--k", cfg.k, "strategy of player 1 receiving the bonus (1-based)");
    sub->add_option("--max-steps", cfg.max_steps, "step budget");
    sub->add_option("--tmax-mult", cfg.tmax_mult, "give up when t exceeds this multiple of t0");
  };

  CLI::App* solve = app.add_subcommand("solve", "trace a path to an equilibrium");
  solve->add_option("game", cfg.input, "game file")->required();
  add_common(solve);
  add_trace(solve);
  solve->add_option("--trace-out", cfg.trace_out, "CSV of accepted path points");
  solve->add_flag("--timing", cfg.timing, "record wall time in the result");

  CLI::App* verify = app.add_subcommand("verify", "check a strategy pair");
  verify->add_option("game", cfg.input, "game file")->required();
  verify->add_option("strategies", cfg.strategies, "strategy file {\"X\": ..., \"Y\": ...}")->required();
  add_common(verify);

  CLI::App* oracle = app.add_subcommand("oracle", "compare the tracer with an independent method");
  oracle->add_option("game", cfg.input, "bimatrix or 2x2 semidefinite game file")->required();
  add_common(oracle);
  add_trace(oracle);
  oracle->add_option("--resolution", cfg.resolution, "grid spacing for 2x2 semidefinite games");

  CLI::App* gen = app.add_subcommand("gen", "write a random game");
  gen->add_option("--m", cfg.m, "player 1 dimension");
  gen->add_option("--n", cfg.n, "player 2 dimension");
  gen->add_option("--seed", cfg.seed, "random seed");
  gen->add_flag("--bimatrix", cfg.bimatrix, "emit a bimatrix game");
  gen->add_option("--out", cfg.out, "output file (stdout if omitted)");

  CLI::App* probe = app.add_subcommand("probe", "sample the non-degeneracy conditions");
  probe->add_option("game", cfg.input, "game file")->required();
  probe->add_option("--samples", cfg.samples, "number of random strategy pairs");
  probe->add_option("--seed", cfg.seed, "random seed");
  probe->add_option("--strategies", cfg.strategies, "equilibrium to check for isolation");
  add_common(probe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  CommandResult res;
  if (*solve) res = cmd_solve(cfg);
  else if (*verify) res = cmd_verify(cfg);
  else if (*oracle) res = cmd_oracle(cfg);
  else if (*gen) res = cmd_gen(cfg);
  else res = cmd_probe(cfg);

  if (cfg.out.empty() || res.code == kInputError) std::cout << sdg::io::to_text(res.document);
  if (!res.diagnostic.empty()) std::cerr << "sdgame: " << res.diagnostic << '\n';
  return res.code;
}
