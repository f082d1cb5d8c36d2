// Command-line driver: ohflux {run,convergence,check} [options]

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ohflux/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::string profile;
  std::string n;
  std::string n_ref;
  std::string t;
  std::string flux;
  std::string cfl;
  std::string out;
  std::string check_every;
  std::string seed;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "flat key = value config file");
  sub->add_option("--profile", f.profile, "initial profile: corner | cosine | zero");
  sub->add_option("--N", f.n, "number of cells");
  sub->add_option("--N-ref", f.n_ref, "reference resolution");
  sub->add_option("--T", f.t, "end time");
  sub->add_option("--flux", f.flux, "numerical flux: eo | lf");
  sub->add_option("--cfl", f.cfl, "CFL safety factor in (0,1]");
  sub->add_option("--out", f.out, "output directory (fallback: $OHFLUX_OUT)");
  sub->add_option("--check-every", f.check_every, "diagnostic stride in steps");
  sub->add_option("--seed", f.seed, "seed for randomized fixtures");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-volume solver for the periodic Ostrovsky-Hunter equation"};
  app.require_subcommand(1);
  Flags flags;
  auto* run = app.add_subcommand("run", "single simulation with snapshots and diagnostics");
  auto* conv = app.add_subcommand("convergence", "self-convergence study against a fine reference");
  auto* check = app.add_subcommand("check", "short run with every discrete estimate checked per step");
  for (auto* sub : {run, conv, check}) add_flags(sub, flags);

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    int const code = app.exit(e);
    return code == 0 ? ohflux::kExitOk : ohflux::kExitUsage;
  }

  ohflux::Command command = ohflux::Command::Run;
  if (conv->parsed()) command = ohflux::Command::Convergence;
  if (check->parsed()) command = ohflux::Command::Check;

  ohflux::KeyValues overrides;
  auto const put = [&](char const* key, std::string const& v) {
    if (!v.empty()) overrides[key] = v;
  };
  put("profile", flags.profile);
  put("N", flags.n);
  put("N_ref", flags.n_ref);
  put("T", flags.t);
  put("flux", flags.flux);
  put("cfl_safety", flags.cfl);
  put("out", flags.out);
  put("check_every", flags.check_every);
  put("seed", flags.seed);

  try {
    std::optional<std::filesystem::path> path;
    if (!flags.config.empty()) path = flags.config;
    auto const cfg = ohflux::parse_config(command, path, overrides);
    return ohflux::dispatch(cfg);
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ohflux::kExitUsage;
  }
}
