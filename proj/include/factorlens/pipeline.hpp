#pragma once

// Orchestration behind the CLI: run configuration (flags or config file,
// file wins on conflict), artifact bundles assembled in memory and flushed
// atomically, and a manifest with content hashes for re-verification.

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "factorlens/ca.hpp"
#include "factorlens/clustering.hpp"
#include "factorlens/data_table.hpp"
#include "factorlens/json_io.hpp"
#include "factorlens/report.hpp"
#include "factorlens/sha256.hpp"
#include "factorlens/synth.hpp"
#include "factorlens/version.hpp"

namespace factorlens {

enum class ClusterMethod { Ward, GmmEii, Both };

struct RunConfig {
  std::string input;
  std::vector<std::string> active_columns;
  std::vector<std::string> supplementary_columns;
  std::vector<std::pair<std::size_t, std::size_t>> axes = {{1, 2}};
  ClusterMethod method = ClusterMethod::Both;
  std::size_t k = 3;
  std::pair<int, int> k_range = {1, 8};
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int max_iter = 500;
  std::string out;  // empty = FACTORLENS_OUT env var, else "factorlens_out"
  bool full_names = false;
};

inline std::string method_name(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::Ward: return "ward";
    case ClusterMethod::GmmEii: return "gmm-eii";
    default: return "both";
  }
}

inline ClusterMethod method_from_name(const std::string& s) {
  if (s == "ward") return ClusterMethod::Ward;
  if (s == "gmm-eii") return ClusterMethod::GmmEii;
  if (s == "both") return ClusterMethod::Both;
  throw ValidationError("unknown clustering method '" + s + "'");
}

inline std::vector<std::pair<std::size_t, std::size_t>> parse_axes(
    const std::vector<std::string>& specs) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& s : specs) {
    const auto comma = s.find(',');
    if (comma == std::string::npos)
      throw ValidationError("axis pair must look like '1,2', got '" + s + "'");
    std::size_t a = 0, b = 0;
    try {
      a = std::stoul(s.substr(0, comma));
      b = std::stoul(s.substr(comma + 1));
    } catch (const std::exception&) {
      throw ValidationError("axis pair must look like '1,2', got '" + s + "'");
    }
    if (a < 1 || b < 1 || a == b)
      throw ValidationError("invalid axis pair '" + s + "'");
    out.emplace_back(a, b);
  }
  return out;
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["input"] = cfg.input;
  j["active"] = cfg.active_columns;
  j["supplementary"] = cfg.supplementary_columns;
  nlohmann::json axes = nlohmann::json::array();
  for (auto [a, b] : cfg.axes)
    axes.push_back(std::to_string(a) + "," + std::to_string(b));
  j["axes"] = std::move(axes);
  j["method"] = method_name(cfg.method);
  j["k"] = cfg.k;
  j["kRange"] = {cfg.k_range.first, cfg.k_range.second};
  j["seed"] = cfg.seed;
  j["tol"] = cfg.tol;
  j["maxIter"] = cfg.max_iter;
  j["out"] = cfg.out;
  j["fullNames"] = cfg.full_names;
  return j;
}

/// Overlay config-file values onto flag values.  The file wins on every
/// key it defines; a warning is recorded for each key the flags had also
/// set explicitly.
inline RunConfig merge_config(const RunConfig& flags,
                              const nlohmann::json& file,
                              const std::vector<std::string>& flag_set_keys,
                              std::vector<std::string>* warnings) {
  RunConfig cfg = flags;
  auto conflicts = [&](const std::string& key) {
    for (const auto& k : flag_set_keys)
      if (k == key) return true;
    return false;
  };
  auto note = [&](const std::string& key) {
    if (warnings && conflicts(key))
      warnings->push_back("config file overrides --" + key);
  };
  if (file.contains("input")) {
    cfg.input = file.at("input").get<std::string>();
    note("input");
  }
  if (file.contains("active")) {
    cfg.active_columns = file.at("active").get<std::vector<std::string>>();
    note("active");
  }
  if (file.contains("supplementary")) {
    cfg.supplementary_columns =
        file.at("supplementary").get<std::vector<std::string>>();
    note("supplementary");
  }
  if (file.contains("axes")) {
    cfg.axes = parse_axes(file.at("axes").get<std::vector<std::string>>());
    note("axes");
  }
  if (file.contains("method")) {
    cfg.method = method_from_name(file.at("method").get<std::string>());
    note("method");
  }
  if (file.contains("k")) {
    cfg.k = file.at("k").get<std::size_t>();
    note("k");
  }
  if (file.contains("kRange")) {
    const auto kr = file.at("kRange").get<std::vector<int>>();
    if (kr.size() != 2) throw ValidationError("kRange must be [min, max]");
    cfg.k_range = {kr[0], kr[1]};
    note("k-range");
  }
  if (file.contains("seed")) {
    cfg.seed = file.at("seed").get<std::uint64_t>();
    note("seed");
  }
  if (file.contains("tol")) {
    cfg.tol = file.at("tol").get<double>();
    note("tol");
  }
  if (file.contains("maxIter")) {
    cfg.max_iter = file.at("maxIter").get<int>();
    note("max-iter");
  }
  if (file.contains("out")) {
    cfg.out = file.at("out").get<std::string>();
    note("out");
  }
  if (file.contains("fullNames")) {
    cfg.full_names = file.at("fullNames").get<bool>();
    note("full-names");
  }
  return cfg;
}

inline std::string resolve_out_dir(const RunConfig& cfg) {
  if (!cfg.out.empty()) return cfg.out;
  if (const char* env = std::getenv("FACTORLENS_OUT"); env && *env)
    return env;
  return "factorlens_out";
}

inline void validate_config(const RunConfig& cfg) {
  for (const auto& a : cfg.active_columns)
    for (const auto& s : cfg.supplementary_columns)
      if (a == s)
        throw ValidationError("column '" + a +
                              "' listed as both active and supplementary");
  if (cfg.method != ClusterMethod::Ward) {
    if (cfg.k_range.first < 1 || cfg.k_range.second < cfg.k_range.first)
      throw ValidationError("k range is empty");
  }
  if (!(cfg.tol > 0.0)) throw ValidationError("tol must be > 0");
  if (cfg.max_iter < 1) throw ValidationError("max-iter must be >= 1");
}

/// Output artifacts assembled in memory and written in one pass, so a
/// failed run leaves no partial bundle behind.
struct Bundle {
  std::vector<std::pair<std::string, std::string>> files;  // name -> bytes
  std::vector<std::string> warnings;

  void add(std::string name, std::string bytes) {
    files.emplace_back(std::move(name), std::move(bytes));
  }

  const std::string* find(const std::string& name) const {
    for (const auto& [n, b] : files)
      if (n == name) return &b;
    return nullptr;
  }
};

inline std::string manifest_json(const Bundle& bundle,
                                 const nlohmann::json& config_echo) {
  nlohmann::json j;
  j["tool"] = "factorlens";
  j["version"] = kVersion;
  j["config"] = config_echo;
  nlohmann::json files;
  for (const auto& [name, bytes] : bundle.files)
    files[name] = sha256_hex(bytes);
  j["files"] = std::move(files);
  j["warnings"] = bundle.warnings;
  return j.dump(2) + "\n";
}

inline void write_bundle(const Bundle& bundle, const std::string& dir,
                         const nlohmann::json& config_echo) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<fs::path> written;
  auto write_one = [&](const std::string& name, const std::string& bytes) {
    const fs::path p = fs::path(dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) {
      for (const auto& w : written) fs::remove(w);
      throw ValidationError("cannot write '" + p.string() + "'");
    }
    out << bytes;
    out.close();
    written.push_back(p);
  };
  for (const auto& [name, bytes] : bundle.files) write_one(name, bytes);
  write_one("manifest.json", manifest_json(bundle, config_echo));
}

/// Recompute hashes against the manifest; returns a line per mismatch.
inline std::vector<std::string> verify_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> problems;
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream in(mpath, std::ios::binary);
  if (!in) return {"missing manifest.json"};
  nlohmann::json manifest;
  in >> manifest;
  for (const auto& [name, hash] : manifest.at("files").items()) {
    std::ifstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) {
      problems.push_back("missing file: " + name);
      continue;
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    if (sha256_hex(buf.str()) != hash.get<std::string>())
      problems.push_back("hash mismatch: " + name);
  }
  return problems;
}

namespace detail {

inline DataTable load_input(const RunConfig& cfg) {
  CsvOptions opt;
  opt.active_columns = cfg.active_columns;
  opt.supplementary_columns = cfg.supplementary_columns;
  opt.has_full_names = cfg.full_names;
  return load_csv(cfg.input, opt);
}

inline void add_plane_svgs(Bundle& bundle, const RunConfig& cfg,
                           const CaResult& res,
                           const std::vector<SupplementaryPoint>& supp) {
  const std::size_t limit = detail::scene_axis_limit(res);
  for (auto [a, b] : cfg.axes) {
    if (a > limit || b > limit) {
      bundle.warnings.push_back("axis pair " + std::to_string(a) + "," +
                                std::to_string(b) +
                                " skipped: not enough factors");
      continue;
    }
    const FactorPlaneScene scene = make_scene(res, a, b, supp);
    bundle.add("plane_f" + std::to_string(a) + "_f" + std::to_string(b) +
                   ".svg",
               render_plane_svg(scene));
  }
}

inline void add_extremal_reports(Bundle& bundle, const CaResult& res) {
  const std::size_t axes = std::min<std::size_t>(2, res.n_positive_factors());
  for (std::size_t k = 1; k <= axes; ++k) {
    for (Direction dir : {Direction::Positive, Direction::Negative}) {
      const ExtremalReport rep = extremal(res, k, dir, 10);
      const std::string stem =
          "extremal_f" + std::to_string(k) + "_" +
          (dir == Direction::Positive ? "positive" : "negative");
      bundle.add(stem + ".md", extremal_markdown(rep));
      bundle.add(stem + ".json", extremal_json(rep).dump(2) + "\n");
    }
  }
}

}  // namespace detail

/// `analyze` command: CA result JSON, factor-plane SVGs with supplementary
/// attributes highlighted, and extremal reports for the first two factors.
inline Bundle run_analyze(const RunConfig& cfg) {
  validate_config(cfg);
  Bundle bundle;
  const DataTable t = detail::load_input(cfg);
  for (const auto& w : t.warnings) bundle.warnings.push_back(w);
  const CaResult res = analyze(t);
  const std::vector<SupplementaryPoint> supp =
      project_all_supplementary(res, t, &bundle.warnings);
  bundle.add("ca_result.json", ca_result_json(res, supp).dump(2) + "\n");
  detail::add_plane_svgs(bundle, cfg, res, supp);
  detail::add_extremal_reports(bundle, res);
  return bundle;
}

/// `cluster` command: CA, then Ward and/or the EII mixture on the row
/// principal coordinates over every nontrivial factor, plus the overlay
/// SVG in the principal plane.
inline Bundle run_cluster(const RunConfig& cfg) {
  validate_config(cfg);
  Bundle bundle;
  const DataTable t = detail::load_input(cfg);
  for (const auto& w : t.warnings) bundle.warnings.push_back(w);
  const CaResult res = analyze(t);

  const std::size_t kpos = res.n_positive_factors();
  if (kpos == 0)
    throw DegeneracyError("table is degenerate: no positive factors");
  const Eigen::MatrixXd points =
      res.row_coords.leftCols(static_cast<Eigen::Index>(kpos));

  const Dendrogram dend = ward_cluster(points, res.row_labels);
  std::optional<Partition> overlay;

  if (cfg.method == ClusterMethod::Ward || cfg.method == ClusterMethod::Both) {
    bundle.add("dendrogram.json", dendrogram_json(dend).dump(2) + "\n");
    const Partition part = cut(dend, cfg.k);
    bundle.add("partition.csv", partition_csv(part, res.row_labels));
    overlay = part;
  }
  if (cfg.method == ClusterMethod::GmmEii ||
      cfg.method == ClusterMethod::Both) {
    const ModelSelection sel = select_model(points, cfg.k_range.first,
                                            cfg.k_range.second, cfg.tol,
                                            cfg.max_iter);
    for (const auto& p : sel.curve)
      if (p.degenerate)
        bundle.warnings.push_back("degenerate EII fit at K=" +
                                  std::to_string(p.K));
    bundle.add("gmm_fit.json", gmm_fit_json(sel.best).dump(2) + "\n");
    bundle.add("bic_curve.json", bic_curve_json(sel.curve).dump(2) + "\n");
    const Partition gmm_part = hard_partition(sel.best);
    bundle.add("gmm_partition.csv", partition_csv(gmm_part, res.row_labels));
    overlay = gmm_part;
  }
  if (overlay) {
    const FactorPlaneScene scene = cluster_overlay(res, *overlay, 1, 2);
    bundle.add("cluster_overlay.svg", render_plane_svg(scene));
  }
  return bundle;
}

struct SynthCliSpec {
  std::size_t groups = 3;
  std::size_t entities = 155;
  std::size_t attributes = 8;
  double separation = 8.0;
  double noise = 0.15;
  bool university_demo = false;  // use the institution-finance templates
};

/// `synth` command: planted-group table plus its ground-truth labels.
inline Bundle run_synth(const SynthCliSpec& spec, std::uint64_t seed) {
  const SynthSpec s =
      spec.university_demo
          ? university_demo_spec()
          : make_blocked_spec(spec.groups, spec.entities, spec.attributes,
                              spec.separation, spec.noise);
  const SynthResult r = synth_fixture(s, seed);
  Bundle bundle;
  bundle.add("table.csv", save_csv_string(r.table, true));
  std::string truth = "entity,group\n";
  for (std::size_t i = 0; i < r.table.n_entities(); ++i)
    truth += r.table.entities[i].first + "," +
             std::to_string(r.truth[i] + 1) + "\n";
  bundle.add("truth.csv", std::move(truth));
  return bundle;
}

/// `report` command: re-render planes and extremal lists from a saved
/// ca_result.json without recomputing the decomposition.
inline Bundle run_report(const RunConfig& cfg) {
  validate_config(cfg);
  std::ifstream in(cfg.input, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + cfg.input + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed ca_result.json: " + std::string(e.what()));
  }
  std::vector<SupplementaryPoint> supp;
  CaResult res;
  try {
    res = ca_result_from_json(j, &supp);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed ca_result.json: " + std::string(e.what()));
  }
  Bundle bundle;
  detail::add_plane_svgs(bundle, cfg, res, supp);
  detail::add_extremal_reports(bundle, res);
  return bundle;
}

}  // namespace factorlens
