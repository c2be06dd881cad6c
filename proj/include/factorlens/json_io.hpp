#pragma once

// JSON/CSV serialization of analysis results.  nlohmann::json keeps object
// keys sorted and formats doubles with shortest round-trip notation, so a
// fixed value always serializes to the same bytes.

#include <json.hpp>

#include <string>
#include <vector>

#include "factorlens/ca.hpp"
#include "factorlens/clustering.hpp"
#include "factorlens/report.hpp"

namespace factorlens {

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j.at(0).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t jj = 0; jj < cols; ++jj)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj)) =
          j.at(i).at(jj).get<double>();
  return m;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::json supplementary_point_json(const SupplementaryPoint& sp) {
  return {{"label", sp.label},
          {"kind", sp.kind == Side::Row ? "row" : "column"},
          {"coords", detail::vector_json(sp.coords)},
          {"cos2", detail::vector_json(sp.cos2)}};
}

inline nlohmann::json ca_result_json(
    const CaResult& res,
    const std::vector<SupplementaryPoint>& supplementary = {}) {
  nlohmann::json j;
  j["masses"] = {{"row", detail::vector_json(res.row_masses)},
                 {"col", detail::vector_json(res.col_masses)}};
  j["sigma"] = detail::vector_json(res.sigma);
  j["lambda"] = detail::vector_json(res.lambda);
  j["rowCoords"] = detail::matrix_json(res.row_coords);
  j["colCoords"] = detail::matrix_json(res.col_coords);
  j["ctr"] = {{"row", detail::matrix_json(res.row_ctr)},
              {"col", detail::matrix_json(res.col_ctr)}};
  j["cos2"] = {{"row", detail::matrix_json(res.row_cos2)},
               {"col", detail::matrix_json(res.col_cos2)}};
  j["signs"] = res.axis_signs;
  j["totalInertia"] = res.total_inertia;
  j["rowLabels"] = res.row_labels;
  j["colLabels"] = res.col_labels;
  nlohmann::json supp = nlohmann::json::array();
  for (const auto& sp : supplementary)
    supp.push_back(supplementary_point_json(sp));
  j["supplementary"] = std::move(supp);
  return j;
}

inline CaResult ca_result_from_json(
    const nlohmann::json& j,
    std::vector<SupplementaryPoint>* supplementary = nullptr) {
  CaResult res;
  res.row_masses = detail::vector_from_json(j.at("masses").at("row"));
  res.col_masses = detail::vector_from_json(j.at("masses").at("col"));
  res.sigma = detail::vector_from_json(j.at("sigma"));
  res.lambda = detail::vector_from_json(j.at("lambda"));
  res.row_coords = detail::matrix_from_json(j.at("rowCoords"));
  res.col_coords = detail::matrix_from_json(j.at("colCoords"));
  res.row_ctr = detail::matrix_from_json(j.at("ctr").at("row"));
  res.col_ctr = detail::matrix_from_json(j.at("ctr").at("col"));
  res.row_cos2 = detail::matrix_from_json(j.at("cos2").at("row"));
  res.col_cos2 = detail::matrix_from_json(j.at("cos2").at("col"));
  res.axis_signs = j.at("signs").get<std::vector<int>>();
  res.total_inertia = j.at("totalInertia").get<double>();
  res.row_labels = j.at("rowLabels").get<std::vector<std::string>>();
  res.col_labels = j.at("colLabels").get<std::vector<std::string>>();
  if (supplementary && j.contains("supplementary")) {
    for (const auto& sj : j.at("supplementary")) {
      SupplementaryPoint sp;
      sp.label = sj.at("label").get<std::string>();
      sp.kind = sj.at("kind").get<std::string>() == "row" ? Side::Row
                                                          : Side::Column;
      sp.coords = detail::vector_from_json(sj.at("coords"));
      sp.cos2 = detail::vector_from_json(sj.at("cos2"));
      supplementary->push_back(std::move(sp));
    }
  }
  return res;
}

// Dendrogram as a nested merge tree.
inline nlohmann::json dendrogram_json(const Dendrogram& dend) {
  const std::size_t n = dend.n_leaves();
  std::vector<nlohmann::json> nodes(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i)
    nodes[i] = {{"label", dend.leaf_labels[i]}, {"size", 1}};
  for (std::size_t m = 0; m < dend.merges.size(); ++m) {
    const Merge& mg = dend.merges[m];
    nodes[n + m] = {
        {"height", mg.height},
        {"size", mg.size},
        {"children", nlohmann::json::array({nodes[static_cast<std::size_t>(
                                                mg.left)],
                                            nodes[static_cast<std::size_t>(
                                                mg.right)]})}};
  }
  return nodes[2 * n - 2];
}

inline nlohmann::json gmm_fit_json(const GmmFit& fit) {
  nlohmann::json j;
  j["K"] = fit.K;
  j["weights"] = detail::vector_json(fit.weights);
  j["means"] = detail::matrix_json(fit.means);
  j["lambda"] = fit.lambda;
  j["responsibilities"] = detail::matrix_json(fit.responsibilities);
  j["loglikTrace"] = fit.loglik_trace;
  j["bic"] = fit.bic;
  j["nParams"] = fit.n_params;
  j["degenerate"] = fit.degenerate;
  return j;
}

inline nlohmann::json bic_curve_json(const std::vector<BicPoint>& curve) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : curve)
    out.push_back(
        {{"K", p.K}, {"bic", p.bic}, {"degenerate", p.degenerate}});
  return out;
}

inline nlohmann::json extremal_json(const ExtremalReport& rep) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : rep.entries)
    entries.push_back({{"label", e.label},
                       {"projection", e.projection},
                       {"contribution", e.contribution},
                       {"cos2", e.cos2}});
  return {{"axis", rep.axis},
          {"direction",
           rep.direction == Direction::Positive ? "positive" : "negative"},
          {"cutoffRule", rep.cutoff_rule},
          {"entries", std::move(entries)}};
}

// Two-column CSV export of a partition.
inline std::string partition_csv(const Partition& part,
                                 const std::vector<std::string>& labels) {
  if (labels.size() != part.labels.size())
    throw ValidationError("partition/label size mismatch");
  std::string out = "entity,cluster\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out += labels[i] + "," + std::to_string(part.labels[i]) + "\n";
  return out;
}

}  // namespace factorlens
