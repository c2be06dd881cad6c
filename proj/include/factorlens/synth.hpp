#pragma once

// Synthetic table generator with planted group structure, used by tests
// and the `synth` CLI command.  Deterministic for a fixed seed.
//
// Each entity draws its row profile from its group's template plus noise
// that is isotropic in the chi-squared geometry: the perturbation lives on
// the profile simplex tangent and is scaled by the square root of the
// design column masses.  Planted groups therefore appear as spherical
// clouds of equal spread in factor coordinates, which is the regime the
// downstream clustering assumes.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "factorlens/data_table.hpp"
#include "factorlens/rng.hpp"

namespace factorlens {

struct SynthGroup {
  std::vector<double> mix;  // relative attribute mix, entries > 0
  std::size_t count = 0;    // entities in the group
};

struct SynthSpec {
  std::vector<SynthGroup> groups;
  std::vector<std::string> attribute_names;  // size = attribute count
  double noise = 0.02;  // chi-squared-metric std dev per tangent dimension
  double row_total_min = 100.0;
  double row_total_max = 1000.0;
  // Active attribute indices for which a derived "as % of row total"
  // supplementary column is appended.
  std::vector<std::size_t> percent_supplementary;
  std::string label_prefix = "E";
};

struct SynthResult {
  DataTable table;
  std::vector<int> truth;  // planted group per entity, 0-based
};

/// k groups over n_attributes; group g boosts attribute (g mod n_attributes)
/// by `separation` relative to the flat mix.
inline SynthSpec make_blocked_spec(std::size_t k, std::size_t n_entities,
                                   std::size_t n_attributes, double separation,
                                   double noise) {
  if (k < 1) throw ValidationError("need at least 1 group");
  if (n_attributes < 2) throw ValidationError("need at least 2 attributes");
  if (n_entities < k) throw ValidationError("fewer entities than groups");
  if (noise < 0.0) throw ValidationError("negative noise level");
  SynthSpec spec;
  spec.noise = noise;
  for (std::size_t j = 0; j < n_attributes; ++j)
    spec.attribute_names.push_back("attr_" + std::to_string(j + 1));
  const std::size_t base = n_entities / k;
  const std::size_t extra = n_entities % k;
  for (std::size_t g = 0; g < k; ++g) {
    SynthGroup grp;
    grp.mix.assign(n_attributes, 1.0);
    grp.mix[g % n_attributes] = separation;
    grp.count = base + (g < extra ? 1 : 0);
    spec.groups.push_back(std::move(grp));
  }
  return spec;
}

/// 155 x 8 institution-finance style fixture: a research-income-heavy
/// group, a grants/tuition-oriented group, and a borrowing-geared group,
/// plus derived percent-of-total supplementary columns.
inline SynthSpec university_demo_spec(double separation = 8.0,
                                      double noise = 0.02) {
  SynthSpec spec;
  spec.attribute_names = {"funding_grants",    "research_income",
                          "tuition_fees",      "overseas_fees",
                          "other_income",      "investment_income",
                          "staff_costs",       "borrowings"};
  spec.noise = noise;
  spec.label_prefix = "U";

  auto flat = std::vector<double>(spec.attribute_names.size(), 1.0);

  SynthGroup research;  // strong research income, some overseas fees
  research.mix = flat;
  research.mix[1] = 1.6 * separation;
  research.mix[3] = 2.0;
  research.count = 50;

  SynthGroup teaching;  // grants and tuition carry the profile
  teaching.mix = flat;
  teaching.mix[0] = 0.5 * separation;
  teaching.mix[2] = 0.5 * separation;
  teaching.count = 55;

  SynthGroup geared;  // borrowing-heavy
  geared.mix = flat;
  geared.mix[7] = separation;
  geared.count = 50;

  spec.groups = {research, teaching, geared};
  spec.percent_supplementary = {7, 6};  // borrowings_pct, staff_costs_pct
  return spec;
}

inline SynthResult synth_fixture(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.groups.empty()) throw ValidationError("need at least 1 group");
  if (spec.noise < 0.0) throw ValidationError("negative noise level");
  const std::size_t n_attr = spec.attribute_names.size();
  if (n_attr < 2) throw ValidationError("need at least 2 attributes");
  std::size_t n_entities = 0;
  for (const auto& g : spec.groups) {
    if (g.mix.size() != n_attr)
      throw ValidationError("group mix size does not match attribute count");
    for (double m : g.mix)
      if (!(m > 0.0)) throw ValidationError("group mix entries must be > 0");
    n_entities += g.count;
  }
  if (n_entities < 2) throw ValidationError("need at least 2 entities");
  for (std::size_t j : spec.percent_supplementary)
    if (j >= n_attr)
      throw ValidationError("percent_supplementary index out of range");

  // Template profiles and the design column masses they imply.
  std::vector<std::vector<double>> tmpl;
  std::vector<double> design_mass(n_attr, 0.0);
  for (const auto& g : spec.groups) {
    const double mix_total = kahan_sum(g.mix);
    std::vector<double> m(n_attr);
    for (std::size_t j = 0; j < n_attr; ++j) {
      m[j] = g.mix[j] / mix_total;
      design_mass[j] +=
          m[j] * static_cast<double>(g.count) / static_cast<double>(n_entities);
    }
    tmpl.push_back(std::move(m));
  }
  std::vector<double> sqrt_mass(n_attr);
  for (std::size_t j = 0; j < n_attr; ++j)
    sqrt_mass[j] = std::sqrt(design_mass[j]);

  Rng rng(seed);
  SynthResult out;
  DataTable& t = out.table;
  t.attributes = spec.attribute_names;
  t.attribute_roles.assign(n_attr, Role::Active);
  const std::size_t n_cols = n_attr + spec.percent_supplementary.size();
  for (std::size_t j : spec.percent_supplementary) {
    t.attributes.push_back(spec.attribute_names[j] + "_pct_total");
    t.attribute_roles.push_back(Role::Supplementary);
  }
  t.values.resize(static_cast<Eigen::Index>(n_entities),
                  static_cast<Eigen::Index>(n_cols));
  t.entity_roles.assign(n_entities, Role::Active);

  std::size_t row = 0;
  int digits = 1;
  for (std::size_t n = n_entities; n >= 10; n /= 10) ++digits;
  std::vector<double> eta(n_attr), profile(n_attr);
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    for (std::size_t e = 0; e < spec.groups[g].count; ++e, ++row) {
      char short_buf[32];
      std::snprintf(short_buf, sizeof(short_buf), "%s%0*zu",
                    spec.label_prefix.c_str(), digits, row + 1);
      t.entities.emplace_back(short_buf,
                              "Entity " + std::to_string(row + 1) + " group " +
                                  std::to_string(g + 1));
      const double total = rng.uniform(spec.row_total_min, spec.row_total_max);

      // Tangent-space perturbation: delta_j = noise * (sqrt(c_j) eta_j -
      // c_j sum_l sqrt(c_l) eta_l); it sums to zero and has isotropic
      // covariance in the chi-squared metric.
      double proj = 0.0;
      for (std::size_t j = 0; j < n_attr; ++j) {
        eta[j] = rng.normal();
        proj += sqrt_mass[j] * eta[j];
      }
      KahanSum row_sum;
      for (std::size_t j = 0; j < n_attr; ++j) {
        const double delta =
            spec.noise * (sqrt_mass[j] * eta[j] - design_mass[j] * proj);
        profile[j] = std::max(tmpl[g][j] + delta, 1e-9);
        const double cell = total * profile[j];
        t.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) =
            cell;
        row_sum.add(cell);
      }
      for (std::size_t s = 0; s < spec.percent_supplementary.size(); ++s) {
        const std::size_t j = spec.percent_supplementary[s];
        t.values(static_cast<Eigen::Index>(row),
                 static_cast<Eigen::Index>(n_attr + s)) =
            100.0 * t.values(static_cast<Eigen::Index>(row),
                             static_cast<Eigen::Index>(j)) /
            row_sum.value();
      }
      out.truth.push_back(static_cast<int>(g));
    }
  }
  validate(t);
  return out;
}

}  // namespace factorlens
