#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gat/tensor.hpp"

using namespace gat;

namespace {

void reset_tape() { Tape::active().clear(); }

}  // namespace

TEST_CASE("matmul computes products and rejects mismatched shapes") {
  reset_tape();
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor ai = matmul(a, eye);
  CHECK(ai.values() == a.values());

  Tensor ones({2, 1}, {1, 1});
  Tensor r = matmul(a, ones);
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r.at(0) == 3.0);
  CHECK(r.at(1) == 7.0);

  Tensor b({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_WITH_AS(static_cast<void>(matmul(b, b)), doctest::Contains("(2x3)"),
                       DimensionError);
}

TEST_CASE("softmax normalizes, stabilizes and validates its axis") {
  reset_tape();
  Tensor x({2}, {0.0, 0.0});
  Tensor y = softmax(x, 0);
  CHECK(y.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.at(1) == doctest::Approx(0.5).epsilon(1e-12));

  Tensor z({2}, {0.0, std::log(3.0)});
  Tensor sz = softmax(z, 0);
  CHECK(sz.at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(sz.at(1) == doctest::Approx(0.75).epsilon(1e-12));

  Tensor big({2}, {1000.0, 1000.0});
  Tensor sb = softmax(big, 0);
  CHECK(sb.at(0) == 0.5);
  CHECK(sb.at(1) == 0.5);

  CHECK_THROWS_AS(static_cast<void>(softmax(x, 1)), DimensionError);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  reset_tape();
  Rng rng(5);
  Tensor x = Tensor::zeros({6, 9});
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-4.0, 4.0);
  Tensor y = softmax(x, 1);
  for (int r = 0; r < 6; ++r) {
    double s = 0.0;
    for (int c = 0; c < 9; ++c) {
      s += y.at(r, c);
      CHECK(y.at(r, c) >= 0.0);
    }
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
  Tensor shifted = affine(x, 1.0, 123.25);
  Tensor ys = softmax(shifted, 1);
  for (int i = 0; i < y.size(); ++i) CHECK(std::fabs(y.at(i) - ys.at(i)) < 1e-12);
}

TEST_CASE("layer_norm normalizes rows and applies the affine transform") {
  reset_tape();
  Tensor x({2}, {1.0, 3.0});
  Tensor gamma({2}, {1.0, 1.0});
  Tensor beta({2}, {0.0, 0.0});
  // the eps -> 0 limit gives exactly [-1, 1]; eps itself must stay positive
  Tensor y = layer_norm(x, gamma, beta, 1e-12);
  CHECK(y.at(0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(y.at(1) == doctest::Approx(1.0).epsilon(1e-6));

  Tensor cst({3}, {7.0, 7.0, 7.0});
  Tensor g3 = Tensor::full({3}, 1.0);
  Tensor b3 = Tensor::full({3}, 5.0);
  Tensor yc = layer_norm(cst, g3, b3, 1e-5);
  for (int i = 0; i < 3; ++i) CHECK(yc.at(i) == doctest::Approx(5.0).epsilon(1e-9));

  Tensor g0 = Tensor::zeros({2});
  Tensor b2({2}, {2.0, -4.0});
  Tensor y0 = layer_norm(x, g0, b2, 1e-5);
  CHECK(y0.at(0) == 2.0);
  CHECK(y0.at(1) == -4.0);

  CHECK_THROWS_AS(static_cast<void>(layer_norm(x, gamma, beta, 0.0)), ParameterError);
  CHECK_THROWS_AS(static_cast<void>(layer_norm(x, gamma, beta, -1.0)), ParameterError);
}

TEST_CASE("embedding_lookup gathers rows and scatters gradients") {
  reset_tape();
  Tensor table({4, 3}, {0, 1, 2, 10, 11, 12, 20, 21, 22, 30, 31, 32}, true);

  Tensor row0 = embedding_lookup(table, {0});
  CHECK(row0.values() == std::vector<double>{0, 1, 2});

  Tensor dup = embedding_lookup(table, {2, 2});
  CHECK(dup.at(0, 0) == 20.0);
  CHECK(dup.at(1, 0) == 20.0);
  Tensor loss = sum(dup);
  backward(loss);
  // both duplicated positions accumulate into row 2
  CHECK(table.grad()[2 * 3 + 0] == 2.0);
  CHECK(table.grad()[2 * 3 + 2] == 2.0);
  CHECK(table.grad()[0] == 0.0);

  CHECK_THROWS_WITH_AS(static_cast<void>(embedding_lookup(table, {4})), doctest::Contains("4"),
                       VocabularyError);
}

TEST_CASE("sparse cross entropy averages non-pad positions") {
  reset_tape();
  const int pad = 0;
  Tensor uniform = Tensor::zeros({1, 4});
  Tensor l1 = sparse_categorical_cross_entropy(uniform, {2}, pad);
  CHECK(l1.value() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Tensor margin = Tensor::zeros({1, 4});
  margin.data()[1] = 50.0;
  Tensor l2 = sparse_categorical_cross_entropy(margin, {1}, pad);
  CHECK(l2.value() < 1e-6);

  // a padded position changes neither the sum nor the count
  Tensor two = Tensor::zeros({2, 4});
  two.data()[2] = 1.5;  // logits row 0
  Tensor lone = sparse_categorical_cross_entropy(slice_cols(two, 0, 4), {2, pad}, pad);
  Tensor single = Tensor::zeros({1, 4});
  single.data()[2] = 1.5;
  Tensor lsingle = sparse_categorical_cross_entropy(single, {2}, pad);
  CHECK(lone.value() == lsingle.value());

  CHECK_THROWS_AS(
      static_cast<void>(sparse_categorical_cross_entropy(two, {pad, pad}, pad)),
      DegenerateBatchError);
}

TEST_CASE("backward provides analytic derivatives and accumulates across fan-out") {
  reset_tape();
  Tensor x = Tensor::scalar(3.0, true);
  Tensor sq = mul(x, x);
  backward(sq);
  CHECK(x.grad()[0] == 6.0);

  reset_tape();
  Tensor w = Tensor::scalar(1.0, true);
  Tensor s = add(w, w);
  backward(s);
  CHECK(w.grad()[0] == 2.0);

  reset_tape();
  Tensor used = Tensor::scalar(2.0, true);
  Tensor unused = Tensor::scalar(5.0, true);
  Tensor l = mul(used, used);
  backward(l);
  CHECK(!unused.has_grad());

  reset_tape();
  Tensor vec({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(vec), ShapeError);
}

TEST_CASE("backward is linear in the loss") {
  auto build = [](Tensor& w) {
    Tensor l1 = mean(mul(w, w));
    Tensor l2 = sum(relu(w));
    return std::pair{l1, l2};
  };
  Rng rng(11);
  Tensor w = Tensor::zeros({5}, true);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);

  reset_tape();
  auto [l1a, l2a] = build(w);
  backward(l1a);
  std::vector<double> g1 = w.grad();
  w.zero_grad();

  reset_tape();
  auto [l1b, l2b] = build(w);
  backward(l2b);
  std::vector<double> g2 = w.grad();
  w.zero_grad();

  const double a = 2.5, b = -1.25;
  reset_tape();
  auto [l1c, l2c] = build(w);
  Tensor combo = add(affine(l1c, a, 0.0), affine(l2c, b, 0.0));
  backward(combo);
  for (int i = 0; i < w.size(); ++i) {
    CHECK(std::fabs(w.grad()[static_cast<std::size_t>(i)] -
                    (a * g1[static_cast<std::size_t>(i)] + b * g2[static_cast<std::size_t>(i)])) <
          1e-10);
  }
  w.zero_grad();
  reset_tape();
}

TEST_CASE("gradients accumulate across backward calls until cleared") {
  reset_tape();
  Tensor x = Tensor::scalar(3.0, true);
  Tensor sq = mul(x, x);
  backward(sq);
  backward(sq);
  CHECK(x.grad()[0] == 12.0);
  x.zero_grad();
  reset_tape();
}

TEST_CASE("finite differences validate every primitive") {
  Rng rng(101);
  auto randomize = [&rng](Tensor t, double lo = -1.0, double hi = 1.0) {
    for (int i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
  };

  SUBCASE("quadratic is exact to rounding") {
    Tensor w = randomize(Tensor::zeros({4}, true));
    auto f = [&] { return sum(mul(w, w)); };
    auto rep = finite_difference_check(f, {{"w", w}}, 1e-5);
    CHECK(rep.max_rel_error < 1e-8);
  }

  SUBCASE("matmul chain") {
    Tensor a = randomize(Tensor::zeros({3, 4}, true));
    Tensor b = randomize(Tensor::zeros({4, 2}, true));
    Tensor c = randomize(Tensor::zeros({3, 2}, false));
    auto f = [&] { return sum(mul(matmul(a, b), c)); };
    auto rep = finite_difference_check(f, {{"a", a}, {"b", b}}, 1e-5);
    CHECK(rep.max_rel_error < 1e-6);
  }

  SUBCASE("matmul_nt") {
    Tensor a = randomize(Tensor::zeros({3, 4}, true));
    Tensor b = randomize(Tensor::zeros({5, 4}, true));
    Tensor c = randomize(Tensor::zeros({3, 5}, false));
    auto f = [&] { return sum(mul(matmul_nt(a, b), c)); };
    auto rep = finite_difference_check(f, {{"a", a}, {"b", b}}, 1e-5);
    CHECK(rep.max_rel_error < 1e-6);
  }

  SUBCASE("softmax, layer_norm and friends") {
    Tensor x = randomize(Tensor::zeros({3, 6}, true));
    Tensor gamma = randomize(Tensor::zeros({6}, true), 0.5, 1.5);
    Tensor beta = randomize(Tensor::zeros({6}, true));
    Tensor probe = randomize(Tensor::zeros({3, 6}, false));
    auto f = [&] {
      Tensor s = softmax(x, 1);
      Tensor nrm = layer_norm(x, gamma, beta, 1e-5);
      return add(sum(mul(s, probe)), sum(mul(nrm, probe)));
    };
    auto rep = finite_difference_check(f, {{"x", x}, {"gamma", gamma}, {"beta", beta}}, 1e-5);
    CHECK(rep.max_rel_error < 1e-4);
  }

  SUBCASE("embedding plus cross entropy") {
    Tensor table = randomize(Tensor::zeros({6, 4}, true));
    Tensor proj = randomize(Tensor::zeros({4, 6}, true));
    std::vector<int> ids{1, 3, 3, 5};
    std::vector<int> targets{2, 0, 4, 1};
    auto f = [&] {
      Tensor e = embedding_lookup(table, ids);
      Tensor logits = matmul(e, proj);
      return sparse_categorical_cross_entropy(logits, targets, 0);
    };
    auto rep = finite_difference_check(f, {{"table", table}, {"proj", proj}}, 1e-5);
    CHECK(rep.max_rel_error < 1e-4);
  }

  SUBCASE("scalar ops: sigmoid, log, clamp, div, column_max") {
    Tensor u = randomize(Tensor::zeros({3, 3}, true), 0.2, 0.8);
    Tensor v = randomize(Tensor::zeros({3, 3}, true), 1.0, 2.0);
    auto f = [&] {
      Tensor s = sigmoid(u);
      Tensor lg = log(clamp(v, 1e-7, 10.0));
      Tensor q = div(s, v);
      Tensor pooled = add(add(mean(s), mean(lg)), mean(q));
      return add(pooled, column_max(u, 1));
    };
    auto rep = finite_difference_check(f, {{"u", u}, {"v", v}}, 1e-5);
    CHECK(rep.max_rel_error < 1e-4);
  }

  SUBCASE("structure ops: slices, concat, row ops") {
    Tensor x = randomize(Tensor::zeros({4, 6}, true));
    Tensor bias = randomize(Tensor::zeros({6}, true));
    Tensor probe = randomize(Tensor::zeros({4, 6}, false));
    auto f = [&] {
      Tensor left = slice_cols(x, 0, 3);
      Tensor right = slice_cols(x, 3, 3);
      Tensor back = concat_cols({left, right});
      Tensor biased = add_rowvec(back, bias);
      Tensor pooled = mean_rows(mul(biased, probe));
      return sum(pooled);
    };
    auto rep = finite_difference_check(f, {{"x", x}, {"bias", bias}}, 1e-5);
    CHECK(rep.max_rel_error < 1e-4);
  }

  SUBCASE("eps outside [1e-8, 1e-3] is rejected") {
    Tensor w = randomize(Tensor::zeros({2}, true));
    auto f = [&] { return sum(mul(w, w)); };
    CHECK_THROWS_AS(static_cast<void>(finite_difference_check(f, {{"w", w}}, 1.0)),
                    ParameterError);
    CHECK_THROWS_AS(static_cast<void>(finite_difference_check(f, {{"w", w}}, 1e-9)),
                    ParameterError);
  }

  SUBCASE("non-deterministic functions are rejected") {
    Tensor w = randomize(Tensor::zeros({2}, true));
    int calls = 0;
    auto f = [&] {
      ++calls;
      return affine(sum(w), 1.0, static_cast<double>(calls));
    };
    CHECK_THROWS_AS(static_cast<void>(finite_difference_check(f, {{"w", w}}, 1e-5)),
                    DeterminismError);
  }
  reset_tape();
}

TEST_CASE("adam takes bias-corrected steps and clears gradients") {
  reset_tape();
  Tensor w = Tensor::scalar(1.0, true);
  Adam opt({{"w", w}}, AdamConfig{0.001, 0.9, 0.999, 1e-8});

  w.grad()[0] = 0.5;
  opt.step();
  // first Adam step reduces to lr * sign(g) up to epsilon
  CHECK(w.value() == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
  CHECK(!w.has_grad());

  const double before = w.value();
  Tensor z = Tensor::scalar(2.0, true);
  Adam opt2({{"z", z}}, AdamConfig{0.001, 0.9, 0.999, 1e-8});
  z.grad();  // allocated zeros
  opt2.step();
  CHECK(z.value() == 2.0);
  static_cast<void>(before);

  w.grad()[0] = -0.25;
  opt.step();
  w.grad()[0] = 0.125;
  opt.step();
  CHECK(opt.step_count() == 3);

  CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("'w'"), OptimizerError);
}

TEST_CASE("forward passes are deterministic for a fixed seed") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = xavier_uniform({8, 8}, rng, false);
    Tensor b = xavier_uniform({8, 8}, rng, false);
    return matmul(softmax(a, 1), layer_norm(b, Tensor::full({8}, 1.0), Tensor::zeros({8}), 1e-5));
  };
  Tensor r1 = run(99);
  Tensor r2 = run(99);
  CHECK(r1.values() == r2.values());
  reset_tape();
}
