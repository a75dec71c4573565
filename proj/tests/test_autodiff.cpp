#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "growthgr/autodiff.hpp"

using namespace growthgr;

namespace {

ParamSet random_params(std::initializer_list<std::pair<std::string, std::vector<int>>> specs,
                       uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  ParamSet ps;
  for (const auto& [name, shape] : specs) {
    Tensor t = Tensor::zeros(shape);
    for (double& x : t.v) x = scale * rng.normal();
    ps[name] = t;
  }
  return ps;
}

}  // namespace

TEST_CASE("softmax cross entropy matches hand values") {
  Tape tape;
  int logits = tape.input(Tensor::vec({0.7, 0.7}));
  int loss = tape.cross_entropy(logits, {1});
  CHECK_THAT(tape.scalar(loss), Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));

  Tape t2;
  int near = t2.cross_entropy(t2.input(Tensor::vec({30.0, -30.0})), {0});
  CHECK(t2.scalar(near) >= 0.0);
  CHECK(t2.scalar(near) < 1e-12);

  // independent direct evaluation of -log(e^{z_t} / sum e^{z_j})
  Rng rng(11);
  std::vector<double> z(7);
  for (double& x : z) x = rng.normal(0, 2);
  int target = 4;
  double denom = 0;
  for (double x : z) denom += std::exp(x);
  double expect = -std::log(std::exp(z[target]) / denom);
  Tape t3;
  int l3 = t3.cross_entropy(t3.input(Tensor::vec(z)), {target});
  CHECK_THAT(t3.scalar(l3), Catch::Matchers::WithinRel(expect, 1e-12));

  Tape t4;
  CHECK_THROWS_AS(t4.cross_entropy(t4.input(Tensor::vec({1, 2, 3})), {3}), Error);
}

TEST_CASE("softmax rows sum to one and cross entropy is non-negative") {
  Rng rng(5);
  Tape tape;
  Tensor x = Tensor::zeros({6, 9});
  for (double& v : x.v) v = rng.normal(0, 3);
  int sm = tape.softmax(tape.input(x));
  for (int i = 0; i < 6; ++i) {
    double s = 0;
    for (int j = 0; j < 9; ++j) s += tape.value(sm).at(i, j);
    CHECK_THAT(s, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  for (int trial = 0; trial < 20; ++trial) {
    Tensor row = Tensor::zeros({5});
    for (double& v : row.v) v = rng.normal(0, 4);
    Tape t;
    CHECK(t.scalar(t.cross_entropy(t.input(row), {trial % 5})) >= 0.0);
  }
}

TEST_CASE("backward of linear and disconnected losses") {
  ParamSet ps;
  ps["W"] = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  ps["U"] = Tensor::from({2}, {3, 4});

  Tape tape;
  auto ids = tape.params(ps);
  int loss = tape.sum(ids["W"]);
  GradMap g = tape.backward(loss);
  for (double x : g["W"].v) CHECK(x == 1.0);
  // non-contributing parameter gets zeros
  REQUIRE(g.count("U"));
  for (double x : g["U"].v) CHECK(x == 0.0);

  Tape t2;
  auto ids2 = t2.params(ps);
  CHECK_THROWS_AS(t2.backward(ids2["W"]), Error);  // non-scalar root
}

TEST_CASE("grad_check on quadratic, constant, and non-deterministic f") {
  ParamSet ps;
  ps["theta"] = Tensor::vec({1.0, 2.0});
  LossGradFn quad = [](const ParamSet& p) {
    Tape t;
    int th = t.param("theta", p.at("theta"));
    int loss = t.sum(t.mul(th, th));
    return std::make_pair(t.scalar(loss), t.backward(loss));
  };
  auto [v, g] = quad(ps);
  CHECK(v == 5.0);
  CHECK(g["theta"].v == std::vector<double>{2.0, 4.0});
  auto rep = grad_check(quad, ps, 1e-5);
  CHECK(rep.max_rel_err < 1e-6);

  LossGradFn constant = [](const ParamSet& p) {
    Tape t;
    int th = t.param("theta", p.at("theta"));
    int loss = t.sum(t.scale(th, 0.0));
    return std::make_pair(t.scalar(loss), t.backward(loss));
  };
  auto repc = grad_check(constant, ps, 1e-5);
  CHECK(repc.max_rel_err == 0.0);

  int calls = 0;
  LossGradFn nondet = [&calls](const ParamSet& p) {
    Tape t;
    int th = t.param("theta", p.at("theta"));
    int loss = t.scale(t.sum(th), 1.0 + 0.001 * (calls++));
    return std::make_pair(t.scalar(loss), t.backward(loss));
  };
  CHECK_THROWS_AS(grad_check(nondet, ps, 1e-5), Error);
}

TEST_CASE("composite attention plus MLP matches finite differences") {
  ParamSet ps = random_params({{"emb", {5, 8}},
                               {"qkv.w", {8, 24}},
                               {"qkv.b", {24}},
                               {"proj.w", {8, 8}},
                               {"ln.g", {8}},
                               {"ln.b", {8}},
                               {"fc.w", {8, 16}},
                               {"fc.b", {16}},
                               {"out.w", {16, 5}}},
                              77);
  for (double& x : ps["ln.g"].v) x = 1.0 + 0.1 * x;

  std::vector<int> toks = {0, 3, 1, 4, 2, 2};
  LossGradFn f = [&toks](const ParamSet& p) {
    Tape t;
    auto ids = t.params(p);
    int x = t.embed(ids["emb"], toks);
    int ln = t.layer_norm(x, ids["ln.g"], ids["ln.b"]);
    int qkv = t.add_bias(t.matmul(ln, ids["qkv.w"]), ids["qkv.b"]);
    int att = t.mha_packed(qkv, 2, {0, static_cast<int>(toks.size())}, true);
    int h = t.add(x, t.matmul(att, ids["proj.w"]));
    int m = t.gelu(t.add_bias(t.matmul(h, ids["fc.w"]), ids["fc.b"]));
    int logits = t.matmul(m, ids["out.w"]);
    int loss = t.mean(t.cross_entropy(logits, {1, 2, 3, 4, 0, 1}));
    return std::make_pair(t.scalar(loss), t.backward(loss));
  };
  auto rep = grad_check(f, ps, 1e-5, 12);
  INFO("worst " << rep.worst_param << "[" << rep.worst_index << "] analytic "
                << rep.worst_analytic << " numeric " << rep.worst_numeric);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("cross attention and concat gradients match finite differences") {
  ParamSet ps = random_params(
      {{"q.w", {6, 4}}, {"k.w", {5, 4}}, {"v.w", {5, 4}}, {"head.w", {8, 1}}}, 13);
  Rng rng(99);
  Tensor qin = Tensor::zeros({3, 6});
  Tensor hist = Tensor::zeros({7, 5});
  for (double& x : qin.v) x = rng.normal();
  for (double& x : hist.v) x = rng.normal();
  std::vector<int> offsets = {0, 3, 3, 7};  // middle query has an empty segment

  LossGradFn f = [&](const ParamSet& p) {
    Tape t;
    auto ids = t.params(p);
    int q = t.matmul(t.input(qin), ids["q.w"]);
    int hin = t.input(hist);
    int k = t.matmul(hin, ids["k.w"]);
    int v = t.matmul(hin, ids["v.w"]);
    int att = t.cross_attn(q, k, v, offsets);
    int cat = t.concat_cols(att, q);
    int out = t.sum(t.matmul(cat, ids["head.w"]));
    return std::make_pair(t.scalar(out), t.backward(out));
  };
  auto rep = grad_check(f, ps, 1e-5);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("policy objective value and gradient") {
  // two rows over a 6-wide logit space with masked supports
  auto ex = std::make_shared<PolicyExtra>();
  ex->eps = 0.2;
  ex->beta = 0.3;
  PolicyRow r0;
  r0.support = {0, 2, 5};
  r0.target = 1;
  r0.logp_old = -1.1;
  r0.adv = 0.8;
  r0.ref_logp = {-1.0, -1.2, -1.1};
  PolicyRow r1;
  r1.support = {1, 3};
  r1.target = 0;
  r1.logp_old = -0.3;
  r1.adv = -1.4;
  r1.ref_logp = {-0.6, -0.8};
  ex->rows = {r0, r1};

  ParamSet ps = random_params({{"logits", {2, 6}}}, 21, 0.8);
  LossGradFn f = [&](const ParamSet& p) {
    Tape t;
    int lg = t.param("logits", p.at("logits"));
    auto e2 = std::make_shared<PolicyExtra>(*ex);
    int obj = t.policy_objective(lg, e2);
    int loss = t.scale(t.mean(obj), -1.0);
    return std::make_pair(t.scalar(loss), t.backward(loss));
  };
  auto rep = grad_check(f, ps, 1e-5, 12);
  CHECK(rep.max_rel_err < 1e-4);

  // KL of a distribution against itself is exactly zero
  Tape t;
  int lg = t.param("logits", ps.at("logits"));
  auto eself = std::make_shared<PolicyExtra>(*ex);
  {
    // recompute ref_logp to equal the masked log-softmax of the logits
    const Tensor& L = ps.at("logits");
    for (size_t r = 0; r < eself->rows.size(); ++r) {
      auto& pr = eself->rows[r];
      double mx = -1e300;
      for (int s : pr.support) mx = std::max(mx, L.at(static_cast<int>(r), s));
      double z = 0;
      for (int s : pr.support) z += std::exp(L.at(static_cast<int>(r), s) - mx);
      double lse = mx + std::log(z);
      pr.ref_logp.clear();
      for (int s : pr.support) pr.ref_logp.push_back(L.at(static_cast<int>(r), s) - lse);
    }
  }
  t.policy_objective(lg, eself);
  for (double kl : eself->kl) CHECK_THAT(kl, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("straight-through estimator passes gradient and quantized forward") {
  ParamSet ps;
  ps["z"] = Tensor::vec({0.4, -0.7, 1.2});
  Tensor q = Tensor::vec({0.5, -1.0, 1.0});
  LossGradFn f = [&](const ParamSet& p) {
    Tape t;
    int z = t.param("z", p.at("z"));
    int st = t.straight_through(z, q);
    int loss = t.sum(t.mul(st, st));
    return std::make_pair(t.scalar(loss), t.backward(loss));
  };
  auto [v, g] = f(ps);
  CHECK_THAT(v, Catch::Matchers::WithinAbs(0.25 + 1.0 + 1.0, 1e-12));
  // d/dz of sum(q^2) via straight-through = 2*q
  CHECK_THAT(g["z"].v[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(g["z"].v[1], Catch::Matchers::WithinAbs(-2.0, 1e-12));
}

TEST_CASE("forward and backward are bit-deterministic") {
  ParamSet ps = random_params({{"w", {6, 6}}, {"b", {6}}}, 3);
  LossGradFn f = [](const ParamSet& p) {
    Tape t;
    auto ids = t.params(p);
    Tensor x = Tensor::zeros({4, 6});
    Rng rng(10);
    for (double& v : x.v) v = rng.normal();
    int h = t.gelu(t.add_bias(t.matmul(t.input(x), ids["w"]), ids["b"]));
    int loss = t.mean(t.mul(h, h));
    return std::make_pair(t.scalar(loss), t.backward(loss));
  };
  auto [v1, g1] = f(ps);
  auto [v2, g2] = f(ps);
  REQUIRE(v1 == v2);
  REQUIRE(g1.at("w").v == g2.at("w").v);
  REQUIRE(g1.at("b").v == g2.at("b").v);
}

TEST_CASE("adam converges on a small quadratic") {
  ParamSet ps;
  ps["x"] = Tensor::vec({5.0, -3.0});
  Adam opt(0.05);
  for (int i = 0; i < 400; ++i) {
    Tape t;
    int x = t.param("x", ps["x"]);
    int loss = t.sum(t.mul(x, x));
    opt.step(ps, t.backward(loss));
  }
  CHECK(std::abs(ps["x"].v[0]) < 1e-2);
  CHECK(std::abs(ps["x"].v[1]) < 1e-2);
}
