#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "factorlens/ca.hpp"
#include "factorlens/clustering.hpp"
#include "factorlens/synth.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace factorlens;
using Catch::Approx;

namespace {

Eigen::MatrixXd gaussian_blobs(int k, int per, int d, double sep,
                               double spread, Rng& rng) {
  Eigen::MatrixXd pts(k * per, d);
  for (int g = 0; g < k; ++g)
    for (int i = 0; i < per; ++i)
      for (int j = 0; j < d; ++j)
        pts(g * per + i, j) =
            (j == g % d ? sep * g : 0.0) + spread * rng.normal();
  return pts;
}

}  // namespace

TEST_CASE("ward: two identical points merge at height zero") {
  Eigen::MatrixXd pts(2, 2);
  pts << 1.5, -2.0, 1.5, -2.0;
  const Dendrogram d = ward_cluster(pts, {"a", "b"});
  REQUIRE(d.merges.size() == 1);
  CHECK(d.merges[0].height == 0.0);
  CHECK(d.merges[0].left == 0);
  CHECK(d.merges[0].right == 1);
  CHECK(d.merges[0].size == 2);
}

TEST_CASE("ward: rectangle corners merge short sides first") {
  // sides 1 and 10; short-side pairs are (0,1) and (2,3)
  Eigen::MatrixXd pts(4, 2);
  pts << 0, 0, 1, 0, 0, 10, 1, 10;
  const Dendrogram d = ward_cluster(pts, {});

  // brute force over all first-step pairs: both short sides cost 0.5,
  // strictly below every other candidate
  double short_cost = 0.5 * (pts.row(0) - pts.row(1)).squaredNorm();
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      const double c = 0.5 * (pts.row(a) - pts.row(b)).squaredNorm();
      if (!((a == 0 && b == 1) || (a == 2 && b == 3)))
        CHECK(c > short_cost + 1.0);
    }

  REQUIRE(d.merges.size() == 3);
  CHECK(d.merges[0].left == 0);
  CHECK(d.merges[0].right == 1);
  CHECK(d.merges[1].left == 2);
  CHECK(d.merges[1].right == 3);
  CHECK(d.merges[0].height == Approx(0.5).margin(1e-12));
  CHECK(d.merges[1].height == Approx(0.5).margin(1e-12));
}

TEST_CASE("ward matches the naive recompute-from-scratch oracle",
          "[property]") {
  Rng rng(101);
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform() * 9);   // 2..10
    const int d = 1 + static_cast<int>(rng.uniform() * 4);   // 1..4
    Eigen::MatrixXd pts(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) pts(i, j) = rng.uniform(-5.0, 5.0);

    const Dendrogram mine = ward_cluster(pts, {});
    const Dendrogram naive = oracles::naive_ward(pts);
    REQUIRE(mine.merges.size() == naive.merges.size());
    for (std::size_t m = 0; m < mine.merges.size(); ++m) {
      CHECK(mine.merges[m].left == naive.merges[m].left);
      CHECK(mine.merges[m].right == naive.merges[m].right);
      CHECK(mine.merges[m].size == naive.merges[m].size);
      CHECK(mine.merges[m].height ==
            Approx(naive.merges[m].height).margin(1e-9));
    }
  }
}

TEST_CASE("ward heights are monotone and add up to the total SS",
          "[property]") {
  Rng rng(103);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 5 + static_cast<int>(rng.uniform() * 40);
    Eigen::MatrixXd pts(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) pts(i, j) = rng.normal();
    const Dendrogram d = ward_cluster(pts, {});
    double total = 0.0;
    for (std::size_t m = 0; m < d.merges.size(); ++m) {
      if (m > 0)
        CHECK(d.merges[m].height >= d.merges[m - 1].height - 1e-12);
      total += d.merges[m].height;
    }
    CHECK(total == Approx(oracles::total_ss(pts)).margin(1e-8));
  }
}

TEST_CASE("ward rejects degenerate input") {
  Eigen::MatrixXd one(1, 2);
  one << 0, 0;
  CHECK_THROWS(ward_cluster(one, {}));
  Eigen::MatrixXd bad(2, 2);
  bad << 0, 0, std::numeric_limits<double>::quiet_NaN(), 1;
  CHECK_THROWS(ward_cluster(bad, {}));
}

TEST_CASE("cut") {
  Rng rng(107);
  Eigen::MatrixXd pts = gaussian_blobs(3, 6, 2, 20.0, 0.5, rng);
  const Dendrogram d = ward_cluster(pts, {});
  SECTION("k = 1 puts everything together") {
    const Partition p = cut(d, 1);
    CHECK(p.k == 1);
    for (int g : p.labels) CHECK(g == 1);
  }
  SECTION("k = n gives singletons") {
    const Partition p = cut(d, 18);
    CHECK(p.k == 18);
    std::set<int> seen(p.labels.begin(), p.labels.end());
    CHECK(seen.size() == 18);
  }
  SECTION("groups are numbered by first leaf appearance") {
    const Partition p = cut(d, 3);
    CHECK(p.labels[0] == 1);
    int running_max = 0;
    for (int g : p.labels) {
      CHECK(g <= running_max + 1);
      running_max = std::max(running_max, g);
    }
  }
  SECTION("recovers the planted blobs") {
    const Partition p = cut(d, 3);
    std::vector<int> truth;
    for (int g = 0; g < 3; ++g)
      for (int i = 0; i < 6; ++i) truth.push_back(g);
    CHECK(oracles::adjusted_rand(p.labels, truth) == 1.0);
  }
  SECTION("k out of range") {
    CHECK_THROWS(cut(d, 0));
    CHECK_THROWS(cut(d, 19));
  }
}

TEST_CASE("fit_eii: K = 1 closed form") {
  Rng rng(109);
  Eigen::MatrixXd pts(40, 3);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 3; ++j) pts(i, j) = rng.normal(2.0, 1.5);
  Partition all_one;
  all_one.labels.assign(40, 1);
  all_one.k = 1;
  const GmmFit fit = fit_eii(pts, 1, all_one);
  const Eigen::RowVectorXd mean = pts.colwise().mean();
  const double lambda =
      (pts.rowwise() - mean).squaredNorm() / (40.0 * 3.0);
  CHECK((fit.means.row(0) - mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fit.lambda == Approx(lambda).margin(1e-10));
  CHECK(fit.weights(0) == 1.0);
  CHECK(fit.n_params == 1 - 1 + 1 * 3 + 1);
}

TEST_CASE("bic follows the defining arithmetic") {
  // loglik = -100, m = 5, n = 50 => bic = -200 - 5 ln 50
  const double bic = 2.0 * (-100.0) - 5.0 * std::log(50.0);
  CHECK(bic == Approx(-219.5601150271407).margin(1e-10));
  Rng rng(113);
  Eigen::MatrixXd pts = gaussian_blobs(2, 25, 2, 14.0, 1.0, rng);
  const Dendrogram d = ward_cluster(pts, {});
  const GmmFit fit = fit_eii(pts, 2, cut(d, 2));
  // bitwise consistency with the fit's own fields
  CHECK(fit.bic == 2.0 * fit.loglik() -
                       static_cast<double>(fit.n_params) *
                           std::log(static_cast<double>(pts.rows())));
}

TEST_CASE("fit_eii: far-separated blobs give sharp responsibilities") {
  Rng rng(127);
  Eigen::MatrixXd pts = gaussian_blobs(2, 30, 3, 50.0, 1.0, rng);
  const Dendrogram d = ward_cluster(pts, {});
  const GmmFit fit = fit_eii(pts, 2, cut(d, 2));
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    CHECK(fit.responsibilities.row(i).maxCoeff() > 0.999);
}

TEST_CASE("fit_eii contracts", "[property]") {
  Rng rng(131);
  for (int rep = 0; rep < 15; ++rep) {
    const int k = 1 + static_cast<int>(rng.uniform() * 4);
    const int per = 8 + static_cast<int>(rng.uniform() * 10);
    const int dim = 2 + static_cast<int>(rng.uniform() * 3);
    Eigen::MatrixXd pts =
        gaussian_blobs(k, per, dim, rng.uniform(3.0, 20.0), 1.0, rng);
    const Dendrogram d = ward_cluster(pts, {});
    const GmmFit fit = fit_eii(pts, k, cut(d, static_cast<std::size_t>(k)));

    // trace is non-decreasing within slack
    for (std::size_t s = 1; s < fit.loglik_trace.size(); ++s)
      CHECK(fit.loglik_trace[s] >= fit.loglik_trace[s - 1] - 1e-9);
    // responsibilities are row-stochastic
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      CHECK(fit.responsibilities.row(i).sum() == Approx(1.0).margin(1e-12));
    // mixing weights are a probability vector
    CHECK(fit.weights.sum() == Approx(1.0).margin(1e-12));
    CHECK(fit.weights.minCoeff() > 0.0);
    CHECK(fit.lambda > 0.0);
    CHECK(fit.n_params == (k - 1) + k * dim + 1);
  }
}

TEST_CASE("fit_eii error paths and degeneracy") {
  Eigen::MatrixXd pts(4, 2);
  pts << 0, 0, 0, 0, 0, 0, 0, 0;
  Partition p2;
  p2.labels = {1, 1, 2, 2};
  p2.k = 2;
  SECTION("K >= n") {
    CHECK_THROWS(fit_eii(pts, 4, p2));
  }
  SECTION("empty initial group") {
    Partition bad;
    bad.labels = {1, 1, 1, 1};
    bad.k = 2;
    CHECK_THROWS(fit_eii(pts, 2, bad));
  }
  SECTION("identical points collapse to a degenerate fit") {
    const GmmFit fit = fit_eii(pts, 2, p2);
    CHECK(fit.degenerate);
  }
}

TEST_CASE("select_model picks the planted K") {
  Rng rng(137);
  SECTION("single blob selects K = 1") {
    Eigen::MatrixXd pts = gaussian_blobs(1, 60, 4, 0.0, 1.0, rng);
    const ModelSelection sel = select_model(pts, 1, 6);
    CHECK(sel.best.K == 1);
    REQUIRE(sel.curve.size() == 6);
    for (std::size_t i = 0; i < sel.curve.size(); ++i)
      CHECK(sel.curve[i].K == static_cast<int>(i) + 1);
  }
  SECTION("two far blobs select K = 2") {
    Eigen::MatrixXd pts = gaussian_blobs(2, 40, 4, 15.0, 1.0, rng);
    const ModelSelection sel = select_model(pts, 1, 6);
    CHECK(sel.best.K == 2);
  }
  SECTION("k_range 1..1 trivially selects the only fit") {
    Eigen::MatrixXd pts = gaussian_blobs(2, 10, 2, 8.0, 1.0, rng);
    const ModelSelection sel = select_model(pts, 1, 1);
    CHECK(sel.best.K == 1);
    CHECK(sel.curve.size() == 1);
  }
  SECTION("empty or oversized range") {
    Eigen::MatrixXd pts = gaussian_blobs(1, 10, 2, 0.0, 1.0, rng);
    CHECK_THROWS(select_model(pts, 2, 1));
    CHECK_THROWS(select_model(pts, 1, 10));
  }
  SECTION("all-degenerate range raises DegeneracyError") {
    Eigen::MatrixXd pts(5, 2);
    pts.setZero();
    CHECK_THROWS_AS(select_model(pts, 1, 2), DegeneracyError);
  }
}

TEST_CASE("rigid motions leave clustering invariant", "[property]") {
  Rng rng(139);
  Eigen::MatrixXd pts = gaussian_blobs(2, 20, 3, 12.0, 1.0, rng);
  const Eigen::MatrixXd rot = testing_support::random_rotation(3, rng);
  Eigen::RowVectorXd shift(3);
  shift << 4.0, -7.0, 11.0;
  Eigen::MatrixXd moved = (pts * rot).rowwise() + shift;

  const Dendrogram a = ward_cluster(pts, {});
  const Dendrogram b = ward_cluster(moved, {});
  REQUIRE(a.merges.size() == b.merges.size());
  for (std::size_t m = 0; m < a.merges.size(); ++m) {
    CHECK(a.merges[m].left == b.merges[m].left);
    CHECK(a.merges[m].right == b.merges[m].right);
    CHECK(a.merges[m].height == Approx(b.merges[m].height).margin(1e-8));
  }

  const ModelSelection sa = select_model(pts, 1, 4);
  const ModelSelection sb = select_model(moved, 1, 4);
  CHECK(sa.best.K == sb.best.K);
  CHECK(sa.best.loglik() == Approx(sb.best.loglik()).margin(1e-8));
}

TEST_CASE("clustering is deterministic") {
  Rng rng(149);
  Eigen::MatrixXd pts = gaussian_blobs(3, 15, 3, 10.0, 1.0, rng);
  const Dendrogram d1 = ward_cluster(pts, {});
  const Dendrogram d2 = ward_cluster(pts, {});
  REQUIRE(d1.merges.size() == d2.merges.size());
  for (std::size_t m = 0; m < d1.merges.size(); ++m) {
    CHECK(d1.merges[m].left == d2.merges[m].left);
    CHECK(d1.merges[m].height == d2.merges[m].height);
  }
  const ModelSelection s1 = select_model(pts, 1, 5);
  const ModelSelection s2 = select_model(pts, 1, 5);
  CHECK(s1.best.K == s2.best.K);
  CHECK(s1.best.bic == s2.best.bic);
  CHECK((s1.best.responsibilities - s2.best.responsibilities)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("full pipeline recovers the planted partition") {
  const SynthResult fixture = synth_fixture(university_demo_spec(), 0);
  const CaResult res = analyze(fixture.table);
  const Eigen::MatrixXd pts = res.row_coords.leftCols(
      static_cast<Eigen::Index>(res.n_positive_factors()));
  const Dendrogram dend = ward_cluster(pts, res.row_labels);
  const Partition ward3 = cut(dend, 3);
  CHECK(oracles::adjusted_rand(ward3.labels, fixture.truth) >= 0.9);
  const ModelSelection sel = select_model(pts, 1, 6);
  const Partition gmm = hard_partition(sel.best);
  CHECK(oracles::adjusted_rand(gmm.labels, fixture.truth) >= 0.9);
}

TEST_CASE("two far-separated planted groups select K = 2 downstream") {
  const SynthResult fixture =
      synth_fixture(make_blocked_spec(2, 100, 6, 10.0, 0.02), 5);
  const CaResult res = analyze(fixture.table);
  const Eigen::MatrixXd pts = res.row_coords.leftCols(
      static_cast<Eigen::Index>(res.n_positive_factors()));
  const ModelSelection sel = select_model(pts, 1, 6);
  CHECK(sel.best.K == 2);
  CHECK(oracles::adjusted_rand(hard_partition(sel.best).labels,
                               fixture.truth) == 1.0);
}
