#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "canids/error.hpp"
#include "canids/features.hpp"
#include "canids/pipeline.hpp"
#include "canids/traffic_synth.hpp"
#include "oracles.hpp"

using namespace canids;

namespace {

WindowGraph window_of(std::size_t index, const std::vector<std::uint32_t>& ids) {
  std::vector<WindowFrame> frames;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    frames.push_back({0.001 * static_cast<double>(i), ids[i], static_cast<std::uint8_t>(i % 32), 0});
  }
  return build_window_graph(index, std::move(frames), false);
}

}  // namespace

TEST_CASE("directed 3-cycle is uniform") {
  const auto g = oracle::unit_graph({1, 2, 3}, {{0, 1}, {1, 2}, {2, 0}});
  const auto r = pagerank(g);
  for (const auto& [id, v] : r.scores) CHECK(std::abs(v - 1.0 / 3.0) < 1e-6);
}

TEST_CASE("single edge closed form") {
  const auto g = oracle::unit_graph({0xA, 0xB}, {{0, 1}});
  const auto r = pagerank(g);
  CHECK(r.converged);
  CHECK(std::abs(r.scores.at(0xA) - 0.075) < 1e-12);
  CHECK(std::abs(r.scores.at(0xB) - 0.13875) < 1e-12);
}

TEST_CASE("isolated node gets the floor") {
  const auto g = oracle::unit_graph({7}, {});
  CHECK(std::abs(pagerank(g).scores.at(7) - 0.15) < 1e-15);
}

TEST_CASE("self-loops are ignored") {
  const auto with = oracle::unit_graph({1, 2}, {{0, 1}, {0, 0}, {1, 1}});
  const auto without = oracle::unit_graph({1, 2}, {{0, 1}});
  CHECK(pagerank(with).scores == pagerank(without).scores);
}

TEST_CASE("unit weights match textbook damped PageRank") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<std::uint32_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(0x100 + 7 * i);
    const auto edges = oracle::random_edges(rng, n);
    const auto g = oracle::unit_graph(ids, edges);

    const PageRankOptions opts;
    const auto ours = pagerank(g, opts);
    const auto ref = oracle::textbook_pagerank(n, edges, opts.damping, opts.tolerance, opts.max_iter);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ours.scores.at(ids[i]) - ref[i]) < 1e-9);

    PageRankOptions tight;
    tight.tolerance = 1e-15;
    tight.max_iter = 5000;
    std::vector<std::vector<double>> share(n, std::vector<double>(n, 0.0));
    std::vector<double> outdeg(n, 0.0);
    for (const auto& [s, t] : edges) outdeg[s] += s != t;
    for (const auto& [s, t] : edges) {
      if (s != t) share[t][s] = 1.0 / outdeg[s];
    }
    const auto exact = oracle::solve_fixed_point(share, 0.85);
    const auto close = pagerank(g, tight);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(close.scores.at(ids[i]) - exact[i]) < 1e-12);
  }
}

TEST_CASE("weighted shares match the algebraic fixed point") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 8;
    std::vector<std::uint32_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i + 1);
    WindowGraph g;
    g.nodes = ids;
    std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t t = 0; t < n; ++t) {
        if (s == t || rng() % 2) continue;
        // Includes exact zeros to exercise the floor.
        w[s][t] = (rng() % 6 == 0) ? 0.0 : static_cast<double>(1 + rng() % 20000) * 1e-6;
        g.edges[{ids[s], ids[t]}] = {w[s][t], 1};
      }
    }
    std::vector<std::vector<double>> share(n, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < n; ++s) {
      double total = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        if (g.edges.count({ids[s], ids[t]})) total += 1.0 / std::max(w[s][t], 1e-9);
      }
      for (std::size_t t = 0; t < n; ++t) {
        if (g.edges.count({ids[s], ids[t]})) share[t][s] = (1.0 / std::max(w[s][t], 1e-9)) / total;
      }
    }
    const auto exact = oracle::solve_fixed_point(share, 0.85);
    PageRankOptions opts;
    opts.tolerance = 1e-15;
    opts.max_iter = 5000;
    const auto r = pagerank(g, opts);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(r.scores.at(ids[i]) - exact[i]) < 1e-10);
  }
}

TEST_CASE("lighter edges carry more rank") {
  WindowGraph g;
  g.nodes = {1, 2, 3};
  g.edges[{1, 2}] = {0.001, 1};
  g.edges[{1, 3}] = {0.010, 1};
  const auto r = pagerank(g);
  CHECK(r.scores.at(2) > r.scores.at(3));
}

TEST_CASE("literal division mode can run away") {
  WindowGraph g;
  g.nodes = {1, 2};
  g.edges[{1, 2}] = {0.001, 1};
  g.edges[{2, 1}] = {0.001, 1};
  PageRankOptions opts;
  opts.mode = PageRankMode::literal_division;
  const auto r = pagerank(g, opts);
  CHECK_FALSE(r.converged);
}

TEST_CASE("pagerank errors") {
  CHECK_THROWS_AS(pagerank(WindowGraph{}), DataError);
  PageRankOptions bad;
  bad.damping = 1.0;
  CHECK_THROWS_AS(pagerank(oracle::unit_graph({1}, {}), bad), ConfigError);
}

TEST_CASE("synthetic windows: floor, monotone residuals, range") {
  const auto data = process_log(build_scenario(table_scenario(7, 1, 15.0)));
  REQUIRE(!data.windows.empty());
  std::size_t flagged = 0;
  for (const auto& w : data.windows) {
    const auto r = pagerank(w);
    const double floor = 0.15 / static_cast<double>(w.nodes.size());
    for (const auto& [id, v] : r.scores) {
      CHECK(v >= floor - 1e-12);
      CHECK(v <= 1.0);
    }
    for (std::size_t i = 2; i < r.residuals.size(); ++i) {
      if (r.residuals[i] > r.residuals[i - 1] * (1.0 + 1e-9) + 1e-15) ++flagged;
    }
  }
  CHECK(flagged == 0);
  for (const auto& row : data.features.rows) {
    CHECK(row.density >= 0.0);
    CHECK(row.density <= 1.0);
  }
}

TEST_CASE("node order does not change the values") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto frames = oracle::random_frames(rng, 100);
    auto g = build_window_graph(0, frames, false);
    const auto base = pagerank(g);
    auto shuffled = g;
    std::shuffle(shuffled.nodes.begin(), shuffled.nodes.end(), rng);
    const auto again = pagerank(shuffled);
    for (const auto& [id, v] : base.scores) CHECK(std::abs(again.scores.at(id) - v) < 1e-12);
  }
}

TEST_CASE("density examples") {
  // 150 preceding ids with v appearing 30 times, window with v 20 times.
  std::vector<std::uint32_t> preceding(150, 2);
  for (int i = 0; i < 30; ++i) preceding[static_cast<std::size_t>(i) * 5] = 1;
  std::vector<std::uint32_t> ids(100, 3);
  for (int i = 0; i < 20; ++i) ids[static_cast<std::size_t>(i) * 5] = 1;
  const auto w = window_of(1, ids);
  const auto d = density(w, preceding);
  CHECK(std::abs(d.at(1) - 0.2) < 1e-15);
  CHECK(d.count(2) == 0);  // only in the lookback

  std::vector<std::uint32_t> first_ids(100, 3);
  for (int i = 0; i < 10; ++i) first_ids[static_cast<std::size_t>(i) * 10] = 1;
  const auto d0 = density(window_of(0, first_ids), {});
  CHECK(std::abs(d0.at(1) - 0.1) < 1e-15);
  CHECK(std::abs(d0.at(3) - 0.9) < 1e-15);

  // Only the last 150 of a longer history count.
  std::vector<std::uint32_t> long_history(400, 1);
  std::fill(long_history.end() - 150, long_history.end(), 2);
  const auto d2 = density(w, long_history);
  CHECK(std::abs(d2.at(1) - 20.0 / 250.0) < 1e-15);
}

TEST_CASE("density bounds on a stream") {
  std::mt19937_64 rng(6);
  const auto windows = build_windows(oracle::random_frames(rng, 800));
  const auto table = make_feature_table(windows);
  std::size_t row = 0;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const double population = static_cast<double>(windows[w].frames.size() + std::min<std::size_t>(150, 100 * w));
    double sum = 0.0;
    for (std::size_t k = 0; k < windows[w].nodes.size(); ++k, ++row) {
      const auto& r = table.rows[row];
      CHECK(r.window == w);
      CHECK(r.density >= 1.0 / population - 1e-15);
      sum += r.density;
    }
    CHECK(sum <= 1.0 + 1e-12);
  }
  CHECK(row == table.rows.size());
}

TEST_CASE("feature table rows and labels") {
  const auto w0 = build_window_graph(0, {{0.0, 1, 0, 0}, {0.1, 2, 0, 1}, {0.2, 3, 0, 0}}, false);
  const auto w1 = build_window_graph(1, {{0.3, 1, 1, 0}, {0.4, 2, 1, 0}, {0.5, 3, 1, 0}, {0.6, 4, 0, 1}}, false);
  const auto table = make_feature_table({w0, w1});
  REQUIRE(table.rows.size() == 7);
  CHECK(table.rows[1].label == 1);
  CHECK(table.rows[6].can_id == 4);
  CHECK(table.rows[6].label == 1);
}

TEST_CASE("feature csv round trip") {
  std::mt19937_64 rng(12);
  const auto table = make_feature_table(build_windows(oracle::random_frames(rng, 400)));
  std::ostringstream out;
  write_feature_csv(table, out);
  CHECK(out.str().rfind("window,can_id_hex,pagerank,density,label\n", 0) == 0);
  std::istringstream in(out.str());
  const auto back = read_feature_csv(in);
  REQUIRE(back.rows.size() == table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    CHECK(back.rows[i].window == table.rows[i].window);
    CHECK(back.rows[i].can_id == table.rows[i].can_id);
    CHECK(back.rows[i].label == table.rows[i].label);
    CHECK(back.rows[i].pagerank == doctest::Approx(table.rows[i].pagerank).epsilon(1e-8));
    CHECK(back.rows[i].density == doctest::Approx(table.rows[i].density).epsilon(1e-8));
  }
}
