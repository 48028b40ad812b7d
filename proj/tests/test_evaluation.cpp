#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <sstream>

#include "polsar/evaluation.hpp"
#include "polsar/rng.hpp"

using namespace polsar;

namespace {

ConfusionMatrix make2(std::int64_t a, std::int64_t b, std::int64_t c,
                      std::int64_t d) {
  ConfusionMatrix m({{1, "one"}, {2, "two"}});
  m.add(0, 0, a);
  m.add(0, 1, b);
  m.add(1, 0, c);
  m.add(1, 1, d);
  return m;
}

}  // namespace

TEST_CASE("confusion counts test pixels only, against the declared classes") {
  std::istringstream rs(
      "train 1 one 0 0 1 1\n"
      "test 1 one 4 0 5 1\n"
      "train 2 two 0 2 1 3\n"
      "test 2 two 4 2 5 3\n");
  const RegionSet regions = RegionSet::parse(rs, "r", 8, 8);

  LabelMap pred(8, 8);
  // training area deliberately mislabeled: must not affect counts
  pred.set(0, 0, 2);
  for (const auto& [x, y] : regions.pixels(1, RegionRole::test))
    pred.set(x, y, 1);
  int flipped = 0;
  for (const auto& [x, y] : regions.pixels(2, RegionRole::test))
    pred.set(x, y, flipped++ < 3 ? 1 : 2);  // 3 known misassignments

  const ConfusionMatrix cm = confusion(pred, regions);
  CHECK(cm.at(0, 0) == 4);
  CHECK(cm.at(0, 1) == 0);
  CHECK(cm.at(1, 0) == 3);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.total() == 8);
}

TEST_CASE("unpredicted or alien test pixels are errors") {
  std::istringstream rs("test 1 one 0 0 0 0\n");
  const RegionSet regions = RegionSet::parse(rs, "r", 2, 2);
  LabelMap unpredicted(2, 2);
  CHECK_THROWS_AS(confusion(unpredicted, regions), std::runtime_error);
  LabelMap alien(2, 2);
  alien.set(0, 0, 9);
  CHECK_THROWS_AS(confusion(alien, regions), std::runtime_error);
}

TEST_CASE("overall accuracy: diagonal, mixed and all-wrong matrices") {
  CHECK(overall_accuracy(make2(10, 0, 0, 5)) == 1.0);
  CHECK(overall_accuracy(make2(40, 10, 20, 30)) == 0.70);
  CHECK(overall_accuracy(make2(0, 7, 3, 0)) == 0.0);
}

TEST_CASE("kappa: exact values from integer counts") {
  CHECK(kappa(make2(10, 0, 0, 5)) == 1.0);
  // p_o = 0.70, p_e = 0.50 -> kappa = 0.40 exactly
  CHECK(kappa(make2(40, 10, 20, 30)) == 0.40);
  // rank-1: prediction independent of truth -> kappa = 0
  CHECK(kappa(make2(30, 30, 20, 20)) == 0.0);
}

TEST_CASE("kappa flags degenerate chance agreement") {
  ConfusionMatrix m({{1, "only"}});
  m.add(0, 0, 12);
  const KappaResult k = kappa_stat(m);
  CHECK(k.value == 0.0);
  CHECK(k.degenerate);
  CHECK_FALSE(kappa_stat(make2(40, 10, 20, 30)).degenerate);
}

TEST_CASE("per-class accuracy is row-normalized; empty rows are undefined") {
  const auto diag = per_class_accuracy(make2(10, 0, 0, 5));
  CHECK(diag[0] == 1.0);
  CHECK(diag[1] == 1.0);

  const auto mixed = per_class_accuracy(make2(40, 10, 20, 30));
  CHECK(*mixed[0] == 0.8);
  CHECK(*mixed[1] == 0.6);

  const auto ua = user_accuracy(make2(40, 10, 20, 30));
  CHECK(*ua[0] == Catch::Approx(40.0 / 60.0));
  CHECK(*ua[1] == Catch::Approx(30.0 / 40.0));

  const auto empty_row = per_class_accuracy(make2(0, 0, 2, 8));
  CHECK_FALSE(empty_row[0].has_value());
  CHECK(*empty_row[1] == 0.8);
}

TEST_CASE("kappa <= F and F is the count-weighted mean of CA") {
  CounterRng rng(97531);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t k = 2 + rng.next_u64() % 4;
    std::vector<ClassInfo> classes;
    for (std::size_t i = 0; i < k; ++i)
      classes.push_back({static_cast<int>(i + 1), "c" + std::to_string(i + 1)});
    ConfusionMatrix m(classes);
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t c = 0; c < k; ++c)
        m.add(t, c, static_cast<std::int64_t>(rng.next_u64() % 20));
    if (m.total() == 0) m.add(0, 0, 1);

    const double f = overall_accuracy(m);
    CHECK(kappa(m) <= f + 1e-15);

    double weighted = 0.0;
    const auto ca = per_class_accuracy(m);
    for (std::size_t t = 0; t < k; ++t)
      if (ca[t]) weighted += *ca[t] * static_cast<double>(m.row_sum(t));
    CHECK(weighted / static_cast<double>(m.total()) ==
          Catch::Approx(f).margin(1e-12));
  }
}

TEST_CASE("metrics are invariant under simultaneous class relabeling") {
  CounterRng rng(2468);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 3;
    ConfusionMatrix m({{1, "a"}, {2, "b"}, {3, "c"}});
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t c = 0; c < k; ++c)
        m.add(t, c, static_cast<std::int64_t>(rng.next_u64() % 15 + 1));

    // relabel classes by a cyclic permutation: rows/cols move together
    std::size_t perm[3] = {2, 0, 1};
    ConfusionMatrix p({{1, "a"}, {2, "b"}, {3, "c"}});
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t c = 0; c < k; ++c)
        p.add(perm[t], perm[c], m.at(t, c));

    CHECK(overall_accuracy(p) == overall_accuracy(m));
    CHECK(kappa(p) == kappa(m));
    const auto ca_m = per_class_accuracy(m);
    const auto ca_p = per_class_accuracy(p);
    for (std::size_t t = 0; t < k; ++t) CHECK(ca_p[perm[t]] == ca_m[t]);
  }
}
