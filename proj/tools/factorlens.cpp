// factorlens: correspondence analysis, Ward / EII-mixture clustering, and
// factor-map reporting for entity x attribute tables.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "factorlens/pipeline.hpp"
#include "factorlens/version.hpp"

namespace {

struct CliState {
  factorlens::RunConfig cfg;
  std::vector<std::string> axes_raw;
  std::string method_raw = "both";
  std::vector<int> k_range_raw;
  std::string config_path;
};

void add_common_flags(CLI::App* cmd, CliState& st) {
  cmd->add_option("--input", st.cfg.input, "input CSV (or ca_result.json for `report`)");
  cmd->add_option("--active", st.cfg.active_columns,
                  "active column names")
      ->delimiter(',');
  cmd->add_option("--supplementary", st.cfg.supplementary_columns,
                  "supplementary column names")
      ->delimiter(',');
  cmd->add_option("--axes", st.axes_raw,
                  "factor plane(s) to plot, e.g. --axes 1,2 --axes 3,4");
  cmd->add_option("--method", st.method_raw,
                  "clustering method: ward | gmm-eii | both");
  cmd->add_option("--k", st.cfg.k, "number of Ward clusters");
  cmd->add_option("--k-range", st.k_range_raw,
                  "K range for BIC selection, e.g. --k-range 1 8")
      ->expected(2);
  cmd->add_option("--seed", st.cfg.seed, "random seed (default 0)");
  cmd->add_option("--tol", st.cfg.tol, "EM convergence tolerance");
  cmd->add_option("--max-iter", st.cfg.max_iter, "EM iteration cap");
  cmd->add_option("--out", st.cfg.out,
                  "output directory (default $FACTORLENS_OUT)");
  cmd->add_flag("--full-names", st.cfg.full_names,
                "CSV has a full-name second column");
  cmd->add_option("--config", st.config_path,
                  "JSON config file; file values win over flags");
}

factorlens::RunConfig resolve_config(const CLI::App* cmd, CliState& st) {
  if (!st.axes_raw.empty()) st.cfg.axes = factorlens::parse_axes(st.axes_raw);
  st.cfg.method = factorlens::method_from_name(st.method_raw);
  if (!st.k_range_raw.empty())
    st.cfg.k_range = {st.k_range_raw[0], st.k_range_raw[1]};

  if (st.config_path.empty()) return st.cfg;

  std::ifstream in(st.config_path);
  if (!in)
    throw factorlens::ValidationError("cannot open config '" + st.config_path +
                                      "'");
  nlohmann::json file;
  try {
    in >> file;
  } catch (const nlohmann::json::exception& e) {
    throw factorlens::ValidationError("malformed config file: " +
                                      std::string(e.what()));
  }
  std::vector<std::string> set_keys;
  for (const char* name :
       {"input", "active", "supplementary", "axes", "method", "k", "k-range",
        "seed", "tol", "max-iter", "out", "full-names"})
    if (cmd->count("--" + std::string(name)) > 0) set_keys.push_back(name);
  std::vector<std::string> warnings;
  const auto cfg = factorlens::merge_config(st.cfg, file, set_keys, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return cfg;
}

void flush(const factorlens::Bundle& bundle, const factorlens::RunConfig& cfg,
           const std::string& dir) {
  for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
  factorlens::write_bundle(bundle, dir, factorlens::config_json(cfg));
  std::cout << "wrote " << bundle.files.size() + 1 << " files to " << dir
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"correspondence analysis and clustering of data tables"};
  app.set_version_flag("--version", factorlens::kVersion);
  app.require_subcommand(1);

  CliState st;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "decompose a table and write maps and extremal reports");
  add_common_flags(analyze, st);
  CLI::App* cluster = app.add_subcommand(
      "cluster", "cluster entities in full-dimensional factor coordinates");
  add_common_flags(cluster, st);
  CLI::App* report = app.add_subcommand(
      "report", "re-render maps and reports from a saved ca_result.json");
  add_common_flags(report, st);

  factorlens::SynthCliSpec synth_spec;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a planted-group table with ground-truth labels");
  synth->add_option("--groups", synth_spec.groups, "number of planted groups");
  synth->add_option("--entities", synth_spec.entities, "number of entities");
  synth->add_option("--attributes", synth_spec.attributes,
                    "number of active attributes");
  synth->add_option("--separation", synth_spec.separation,
                    "group separation factor");
  synth->add_option("--noise", synth_spec.noise, "lognormal noise sigma");
  synth->add_flag("--university-demo", synth_spec.university_demo,
                  "use the institution-finance demo templates");
  synth->add_option("--seed", synth_seed, "random seed (default 0)");
  synth->add_option("--out", synth_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      factorlens::RunConfig echo_cfg;
      echo_cfg.seed = synth_seed;
      echo_cfg.out = synth_out;
      const auto bundle = factorlens::run_synth(synth_spec, synth_seed);
      nlohmann::json echo = factorlens::config_json(echo_cfg);
      echo["synth"] = {{"groups", synth_spec.groups},
                       {"entities", synth_spec.entities},
                       {"attributes", synth_spec.attributes},
                       {"separation", synth_spec.separation},
                       {"noise", synth_spec.noise},
                       {"universityDemo", synth_spec.university_demo}};
      const std::string dir = factorlens::resolve_out_dir(echo_cfg);
      for (const auto& w : bundle.warnings)
        std::cerr << "warning: " << w << "\n";
      factorlens::write_bundle(bundle, dir, echo);
      std::cout << "wrote " << bundle.files.size() + 1 << " files to " << dir
                << "\n";
      return 0;
    }

    CLI::App* active_cmd = *analyze ? analyze : (*cluster ? cluster : report);
    const factorlens::RunConfig cfg = resolve_config(active_cmd, st);
    const std::string dir = factorlens::resolve_out_dir(cfg);
    if (*analyze) {
      flush(factorlens::run_analyze(cfg), cfg, dir);
    } else if (*cluster) {
      flush(factorlens::run_cluster(cfg), cfg, dir);
    } else {
      flush(factorlens::run_report(cfg), cfg, dir);
    }
    return 0;
  } catch (const factorlens::DegeneracyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
