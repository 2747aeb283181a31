#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sman/autodiff.hpp"
#include "sman/errors.hpp"
#include "sman/grad_check.hpp"
#include "sman/primitives.hpp"

using namespace sman;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 0.5) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : t.data()) v = static_cast<T>(normal(rng));
  return t;
}

// Naive triple loop, independent of the Eigen path.
template <typename T>
Tensor<T> naive_matmul(const Tensor<T>& a, const Tensor<T>& b, bool ta, bool tb) {
  const auto n = ta ? a.cols() : a.rows();
  const auto k = ta ? a.rows() : a.cols();
  const auto m = tb ? b.rows() : b.cols();
  Tensor<T> c({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += (ta ? a(p, i) : a(i, p)) * (tb ? b(j, p) : b(p, j));
      c(i, j) = acc;
    }
  return c;
}

// Scalar loss sum((f(params) * weights)^2) with gradients written to the store.
template <typename T, typename Build>
LossFunction<T> op_loss(Build build, Tensor<T> weights) {
  return [build, weights](ParamStore<T>& params) {
    params.zero_grad();
    Tape<T> tape;
    auto out = build(tape, params);
    auto loss = ad::sum_squares(ad::mul_const(out, weights));
    tape.backward(loss);
    return loss.value()[0];
  };
}

template <typename T>
struct OpCase {
  const char* name;
  std::vector<std::pair<std::string, Shape>> inputs;
  Shape output;
  std::function<Var<T>(Tape<T>&, ParamStore<T>&)> build;
};

template <typename T>
std::vector<OpCase<T>> op_cases() {
  using V = Var<T>;
  auto p = [](Tape<T>& t, ParamStore<T>& s, const char* n) { return t.parameter(s.at(n)); };
  static const std::vector<std::size_t> gather_idx{2, 0, 1, 2};
  static const Tensor<T> mask = Tensor<T>::matrix(3, 4, {1, 0, 0.5, 1, 0, 0, 0, 0, 0.2, 1, 1, 0});
  static const Tensor<T> const_w = Tensor<T>::matrix(3, 4, {0.3, -1, 2, 0.5, 1, 1, -0.7, 0.1, 0.4, 0.9, -0.2, 1.5});
  static const std::vector<std::size_t> labels{1, 0, 3};
  return {
      {"matmul", {{"a", {3, 5}}, {"b", {5, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::matmul(p(t, s, "a"), p(t, s, "b")); }},
      {"matmul_ta", {{"a", {5, 3}}, {"b", {5, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::matmul(p(t, s, "a"), p(t, s, "b"), true, false); }},
      {"matmul_tb", {{"a", {3, 5}}, {"b", {4, 5}}}, {3, 4}, [=](auto& t, auto& s) { return ad::matmul(p(t, s, "a"), p(t, s, "b"), false, true); }},
      {"matmul_tab", {{"a", {5, 3}}, {"b", {4, 5}}}, {3, 4}, [=](auto& t, auto& s) { return ad::matmul(p(t, s, "a"), p(t, s, "b"), true, true); }},
      {"add", {{"a", {3, 4}}, {"b", {3, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::add(p(t, s, "a"), p(t, s, "b")); }},
      {"sub", {{"a", {3, 4}}, {"b", {3, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::sub(p(t, s, "a"), p(t, s, "b")); }},
      {"mul", {{"a", {3, 4}}, {"b", {3, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::mul(p(t, s, "a"), p(t, s, "b")); }},
      {"scale", {{"a", {3, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::scale(p(t, s, "a"), T(-1.7)); }},
      {"mul_const", {{"a", {3, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::mul_const(p(t, s, "a"), const_w); }},
      {"add_bias", {{"a", {3, 4}}, {"b", {4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::add_bias(p(t, s, "a"), p(t, s, "b")); }},
      {"elu", {{"a", {3, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::elu(p(t, s, "a")); }},
      {"softmax_rows", {{"a", {3, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::softmax_rows(p(t, s, "a")); }},
      {"masked_softmax_rows", {{"a", {3, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::masked_softmax_rows(p(t, s, "a"), mask); }},
      {"gather_rows", {{"a", {3, 4}}}, {4, 4}, [=](auto& t, auto& s) { return ad::gather_rows(p(t, s, "a"), std::span<const std::size_t>(gather_idx), true); }},
      {"concat_cols", {{"a", {3, 1}}, {"b", {3, 3}}}, {3, 4}, [=](auto& t, auto& s) {
         std::vector<V> parts{p(t, s, "a"), p(t, s, "b")};
         return ad::concat_cols<T>(parts);
       }},
      {"concat_rows", {{"a", {1, 4}}, {"b", {2, 4}}}, {3, 4}, [=](auto& t, auto& s) {
         std::vector<V> parts{p(t, s, "a"), p(t, s, "b")};
         return ad::concat_rows<T>(parts);
       }},
      {"slice_rows", {{"a", {5, 4}}}, {3, 4}, [=](auto& t, auto& s) { return ad::slice_rows(p(t, s, "a"), 1, 4); }},
      {"unfold_windows", {{"a", {5, 2}}}, {3, 6}, [=](auto& t, auto& s) { return ad::unfold_windows(p(t, s, "a"), 3); }},
      {"max_rows", {{"a", {6, 4}}}, {1, 4}, [=](auto& t, auto& s) { return ad::max_rows(p(t, s, "a"), 5); }},
      {"nll_softmax", {{"a", {3, 4}}}, {1}, [=](auto& t, auto& s) {
         return ad::nll(ad::softmax_rows(p(t, s, "a")), std::span<const std::size_t>(labels));
       }},
      {"sum", {{"a", {1}}, {"b", {1}}}, {1}, [=](auto& t, auto& s) {
         std::vector<V> parts{p(t, s, "a"), p(t, s, "b"), ad::sum_squares(p(t, s, "a"))};
         return ad::sum<T>(parts);
       }},
  };
}

template <typename T>
double worst_primitive_error(T epsilon) {
  std::mt19937_64 rng(11);
  double worst = 0;
  for (const auto& c : op_cases<T>()) {
    ParamStore<T> params;
    for (const auto& [name, shape] : c.inputs) params.add(name, random_tensor<T>(shape, rng));
    auto weights = random_tensor<T>(c.output, rng, 1.0);
    auto loss = op_loss<T>(c.build, weights);
    const double err = grad_check_report<T>(loss, params, epsilon).max_error;
    INFO(c.name << " error " << err);
    CHECK(std::isfinite(err));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

TEST_CASE("tensor construction checks extents") {
  CHECK_THROWS_AS(Tensor<double>({2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(Tensor<double>({2, 0}), ShapeError);
  const auto m = Tensor<double>::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  CHECK(Tensor<double>::scalar(4).shape() == Shape{1});
}

TEST_CASE_TEMPLATE("matmul matches a naive triple loop", T, float, double) {
  std::mt19937_64 rng(3);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      auto a = random_tensor<T>(ta ? Shape{7, 4} : Shape{4, 7}, rng);
      auto b = random_tensor<T>(tb ? Shape{5, 7} : Shape{7, 5}, rng);
      const auto got = matmul(a, b, ta, tb);
      const auto want = naive_matmul(a, b, ta, tb);
      REQUIRE(got.shape() == want.shape());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
    }
  CHECK_THROWS_AS(matmul(Tensor<T>({2, 3}), Tensor<T>({2, 3})), ShapeError);
}

TEST_CASE("softmax_rows examples") {
  auto a = softmax_rows(Tensor<double>::matrix(1, 2, {0, 0}));
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[1] == doctest::Approx(0.5));

  auto b = softmax_rows(Tensor<double>::matrix(1, 2, {1, 2}));
  const double e = std::exp(1.0);
  CHECK(b[0] == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-12));
  CHECK(b[0] == doctest::Approx(0.26894).epsilon(1e-4));
  CHECK(b[1] == doctest::Approx(0.73106).epsilon(1e-4));

  auto c = softmax_rows(Tensor<double>::matrix(1, 3, {5, 5, 5}));
  for (double v : c.data()) CHECK(v == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(softmax_rows(Tensor<double>({2, 2, 2})), ShapeError);
}

TEST_CASE("softmax rows sum to one, are positive and shift invariant") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_tensor<double>({4, 6}, rng, 5.0);
    auto shifted = m;
    for (std::size_t r = 0; r < 4; ++r)
      for (auto& v : shifted.row(r)) v += static_cast<double>(r) * 37.5 - 50;
    const auto s = softmax_rows(m);
    const auto t = softmax_rows(shifted);
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0;
      for (double v : s.row(r)) {
        CHECK(v > 0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s[i] - t[i]) <= 1e-6);
  }
  const auto big = softmax_rows(Tensor<double>::matrix(1, 2, {1000, -1000}));
  CHECK(std::isfinite(big[0]));
  CHECK(std::isfinite(big[1]));
}

TEST_CASE("masked_softmax_rows zeroes masked positions and empty rows") {
  const auto scores = Tensor<double>::matrix(2, 3, {3, -1, 8, 1, 2, 3});
  const auto mask = Tensor<double>::matrix(2, 3, {1, 0.5, 0, 0, 0, 0});
  const auto w = masked_softmax_rows(scores, mask);
  CHECK(w(0, 2) == 0.0);
  CHECK(w(0, 0) + w(0, 1) == doctest::Approx(1.0));
  for (double v : w.row(1)) CHECK(v == 0.0);
  const auto single = masked_softmax_rows(Tensor<double>::matrix(1, 2, {-40, 9}), Tensor<double>::matrix(1, 2, {1, 0}));
  CHECK(single[0] == 1.0);
  CHECK(single[1] == 0.0);
}

TEST_CASE("elu examples") {
  CHECK(elu(0.0) == 0.0);
  CHECK(elu(1.0) == 1.0);
  CHECK(elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(elu(-1.0) == doctest::Approx(-0.63212).epsilon(1e-5));
  CHECK(elu(-1e-12) == doctest::Approx(0.0));
}

TEST_CASE("cross_entropy examples") {
  const std::vector<double> perfect{1, 0, 0};
  CHECK(cross_entropy<double>(perfect, 0) == 0.0);
  const std::vector<double> uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(cross_entropy<double>(uniform, 1) == doctest::Approx(std::log(3.0)));
  CHECK(cross_entropy<double>(uniform, 1) == doctest::Approx(1.09861).epsilon(1e-5));
  const std::vector<double> half{0.5, 0.5};
  CHECK(cross_entropy<double>(half, 1) == doctest::Approx(0.69315).epsilon(1e-5));
  CHECK(cross_entropy<double>(perfect, 1) == doctest::Approx(-std::log(kProbabilityFloor)));
  CHECK_THROWS_AS(cross_entropy<double>(half, 2), IndexError);
}

TEST_CASE("grad_check on a quadratic is exact") {
  ParamStore<double> params;
  params.add("p", Tensor<double>::scalar(3));
  LossFunction<double> loss = [](ParamStore<double>& s) {
    auto& e = s.at("p");
    e.grad[0] = 2 * e.value[0];
    return e.value[0] * e.value[0];
  };
  CHECK(grad_check<double>(loss, params, 1e-4) < 1e-6);
}

TEST_CASE("grad_check detects a wrong gradient") {
  ParamStore<double> params;
  params.add("p", Tensor<double>::scalar(2));
  LossFunction<double> loss = [](ParamStore<double>& s) {
    auto& e = s.at("p");
    e.grad[0] = 3 * e.value[0];  // true derivative is 2p = 4
    return e.value[0] * e.value[0];
  };
  const auto report = grad_check_report<double>(loss, params, 1e-4);
  CHECK(report.max_error >= 0.3);
  CHECK(report.worst_parameter == "p");
  CHECK(report.analytic == doctest::Approx(6));
  CHECK(report.numeric == doctest::Approx(4));
}

TEST_CASE("grad_check rejects non-deterministic losses and bad epsilon") {
  ParamStore<double> params;
  params.add("p", Tensor<double>::scalar(1));
  int calls = 0;
  LossFunction<double> loss = [&calls](ParamStore<double>& s) {
    s.at("p").grad[0] = 0;
    return static_cast<double>(++calls);
  };
  CHECK_THROWS_AS(grad_check<double>(loss, params, 1e-4), DeterminismError);
  LossFunction<double> fine = [](ParamStore<double>& s) {
    s.at("p").grad[0] = 1;
    return s.at("p").value[0];
  };
  CHECK_THROWS_AS(grad_check<double>(fine, params, 0.0), ConfigError);
}

TEST_CASE("every differentiable primitive passes grad_check in 64-bit") {
  CHECK(worst_primitive_error<double>(1e-6) < 1e-5);
}

TEST_CASE("every differentiable primitive passes grad_check in 32-bit") {
  CHECK(worst_primitive_error<float>(1e-2f) < 1e-3);
}

TEST_CASE("gather_rows sends nothing to the PAD row") {
  ParamStore<double> params;
  params.add("t", Tensor<double>::matrix(3, 2, {9, 9, 1, 2, 3, 4}), true);
  Tape<double> tape;
  const std::vector<std::size_t> idx{0, 2, 0, 1};
  auto rows = ad::gather_rows(tape.parameter(params.at("t")), std::span<const std::size_t>(idx), true);
  CHECK(rows.value().row(0)[0] == 0.0);
  CHECK(rows.value().row(1)[1] == 4.0);
  tape.backward(ad::sum_squares(rows));
  CHECK(params.at("t").grad(0, 0) == 0.0);
  CHECK(params.at("t").grad(0, 1) == 0.0);
  CHECK(params.at("t").grad(2, 1) == doctest::Approx(8.0));
}

TEST_CASE("ParamStore keeps names unique, order stable and grads shaped") {
  ParamStore<double> a, b;
  for (auto* s : {&a, &b}) {
    s->add("z", Tensor<double>({2, 3}));
    s->add("a", Tensor<double>({4}));
    s->add("m", Tensor<double>({1, 1}));
  }
  std::vector<std::string> na, nb;
  for (const auto& e : a) {
    na.push_back(e.name);
    CHECK(e.grad.shape() == e.value.shape());
  }
  for (const auto& e : b) nb.push_back(e.name);
  CHECK(na == std::vector<std::string>{"z", "a", "m"});
  CHECK(na == nb);
  CHECK(a.scalar_count() == 11);
  CHECK_THROWS_AS(a.add("a", Tensor<double>({1})), ConfigError);
  CHECK_THROWS_AS(a.at("missing"), IndexError);
}
